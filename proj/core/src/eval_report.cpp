#include "srfl/eval_report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "srfl/csv.hpp"
#include "srfl/errors.hpp"

namespace srfl::eval {

namespace {

bool finite_range(const data::Range& r) { return std::isfinite(r.min) && std::isfinite(r.max); }

}  // namespace

EvalReport evaluate(models::Model& model, std::span<const data::Context> raw_test,
                    const data::NormMeta& meta, const std::string& run_id) {
  for (const auto& r : meta.ranges) {
    if (!finite_range(r) || r.max < r.min) throw ConfigError("normalization metadata is invalid");
  }
  const auto& cfg = model.config();
  std::vector<TaggedError> errors;
  for (const auto& ctx : raw_test) {
    if (ctx.data.normalized) {
      throw ConfigError("context " + std::to_string(ctx.data.context_id) +
                        " is already normalized; evaluation expects raw rows");
    }
    if (ctx.data.max_aps != cfg.max_aps || ctx.data.max_stas != cfg.max_stas) {
      throw ConfigError("context " + std::to_string(ctx.data.context_id) + " has shape (a=" +
                        std::to_string(ctx.data.max_aps) + ", b=" +
                        std::to_string(ctx.data.max_stas) + ") but the model expects (a=" +
                        std::to_string(cfg.max_aps) + ", b=" + std::to_string(cfg.max_stas) +
                        ")");
    }
    data::Context norm = ctx;
    norm.data = data::normalize(ctx.data, meta);
    const auto pred = models::predict_rows(model, norm);
    const int n_aps = ctx.data.n_aps();
    for (std::size_t i = 0; i < ctx.data.rows.size(); ++i) {
      const auto& row = ctx.data.rows[i];
      if (row.mask == 0) continue;
      TaggedError e;
      e.context_id = row.context_id;
      e.variation_id = row.variation_id;
      e.tau = row.tau;
      e.sta_index = row.sta_index;
      e.n_aps = n_aps;
      e.n_stas = ctx.data.n_stas;
      e.predicted_mbps = meta.denormalize_label(pred[i]);
      e.label_mbps = row.throughput;
      e.error = std::abs(e.predicted_mbps - e.label_mbps);
      errors.push_back(e);
    }
  }
  return make_report(run_id, std::string(models::to_string(cfg.arch)), std::move(errors));
}

EvalReport make_report(std::string run_id, std::string arch, std::vector<TaggedError> errors) {
  if (errors.empty()) throw ConfigError("report '" + run_id + "' has no predictions");
  EvalReport r;
  r.run_id = std::move(run_id);
  r.arch = std::move(arch);
  std::vector<double> values;
  values.reserve(errors.size());
  double sum = 0.0;
  for (const auto& e : errors) {
    values.push_back(e.error);
    sum += e.error;
  }
  r.overall_mae = sum / static_cast<double>(values.size());
  r.cdf = error_cdf(values, default_cdf_grid(values));
  // Close the curve at the largest error so it always reaches 1.
  const double max_error = *std::max_element(values.begin(), values.end());
  if (r.cdf.empty() || r.cdf.back().error < max_error) r.cdf.push_back({max_error, 1.0});
  r.errors = std::move(errors);
  r.breakdown = breakdown_by_size(r.errors);
  return r;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ConfigError("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<CdfPoint> error_cdf(std::span<const double> errors, std::span<const double> grid) {
  if (errors.empty()) throw ConfigError("error CDF of an empty set");
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  std::vector<CdfPoint> out;
  out.reserve(grid.size());
  for (double e : grid) {
    const auto below = std::upper_bound(sorted.begin(), sorted.end(), e) - sorted.begin();
    out.push_back({e, static_cast<double>(below) / n});
  }
  return out;
}

std::vector<double> default_cdf_grid(std::span<const double> errors, std::size_t points) {
  if (points < 2) throw ConfigError("CDF grid needs at least two points");
  const double top = quantile(std::vector<double>(errors.begin(), errors.end()), 0.995);
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = top * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return grid;
}

std::vector<BreakdownRow> breakdown_by_size(std::span<const TaggedError> errors) {
  std::vector<BreakdownRow> rows;
  const auto group = [&](const char* name, auto key) {
    std::map<int, std::vector<double>> by;
    for (const auto& e : errors) by[key(e)].push_back(e.error);
    for (auto& [value, v] : by) {
      BreakdownRow r;
      r.group = name;
      r.value = value;
      r.count = v.size();
      double sum = 0.0;
      for (double x : v) sum += x;
      r.mae = sum / static_cast<double>(v.size());
      r.median = quantile(v, 0.5);
      r.q1 = quantile(v, 0.25);
      r.q3 = quantile(v, 0.75);
      rows.push_back(std::move(r));
    }
  };
  group("n_aps", [](const TaggedError& e) { return e.n_aps; });
  group("n_stas", [](const TaggedError& e) { return e.n_stas; });
  return rows;
}

double fraction_below(std::span<const TaggedError> errors, double limit) {
  if (errors.empty()) return 0.0;
  const auto n = std::count_if(errors.begin(), errors.end(),
                               [&](const TaggedError& e) { return e.error < limit; });
  return static_cast<double>(n) / static_cast<double>(errors.size());
}

std::vector<ComparisonRow> compare_runs(std::span<const EvalReport> reports) {
  if (reports.size() < 2) throw ConfigError("comparison needs at least two reports");
  const auto& ref = reports.front().errors;
  for (const auto& r : reports) {
    bool same = r.errors.size() == ref.size();
    for (std::size_t i = 0; same && i < ref.size(); ++i) same = r.errors[i].same_key(ref[i]);
    if (!same) {
      throw ConfigError("run '" + r.run_id + "' was evaluated on a different test set than '" +
                        reports.front().run_id + "'");
    }
  }
  std::vector<ComparisonRow> rows;
  for (const auto& r : reports) {
    ComparisonRow c;
    c.run_id = r.run_id;
    c.arch = r.arch;
    c.mae = r.overall_mae;
    c.frac_below_10mbps = fraction_below(r.errors, 10.0);
    c.n_errors = r.errors.size();
    rows.push_back(std::move(c));
  }
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rows[a].mae < rows[b].mae; });
  for (std::size_t i = 0; i < order.size(); ++i) rows[order[i]].rank = static_cast<int>(i + 1);
  return rows;
}

namespace {

std::ofstream open_out(const std::string& path, const std::string& comment) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  if (!comment.empty()) out << '#' << comment << '\n';
  return out;
}

const std::vector<std::string> kReportHeader = {
    "context_id", "variation_id", "tau",       "sta_index",     "n_aps",
    "n_stas",     "predicted_mbps", "label_mbps", "abs_error_mbps"};

}  // namespace

void write_report_csv(const std::string& path, const EvalReport& r, const std::string& comment) {
  auto out = open_out(path, comment);
  out << "#run_id=" << r.run_id << '\n';
  out << "#arch=" << r.arch << '\n';
  out << "#overall_mae_mbps=" << csv::format_double(r.overall_mae) << '\n';
  out << csv::join(kReportHeader) << '\n';
  for (const auto& e : r.errors) {
    out << e.context_id << ',' << e.variation_id << ',' << e.tau << ',' << e.sta_index << ','
        << e.n_aps << ',' << e.n_stas << ',' << csv::format_double(e.predicted_mbps) << ','
        << csv::format_double(e.label_mbps) << ',' << csv::format_double(e.error) << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

void write_cdf_csv(const std::string& path, const EvalReport& r, const std::string& comment) {
  auto out = open_out(path, comment);
  out << "error_mbps,fraction\n";
  for (const auto& p : r.cdf) {
    out << csv::format_double(p.error) << ',' << csv::format_double(p.fraction) << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

void write_breakdown_csv(const std::string& path, const EvalReport& r,
                         const std::string& comment) {
  auto out = open_out(path, comment);
  out << "group,value,count,mae_mbps,median_mbps,q1_mbps,q3_mbps\n";
  for (const auto& b : r.breakdown) {
    out << b.group << ',' << b.value << ',' << b.count << ',' << csv::format_double(b.mae) << ','
        << csv::format_double(b.median) << ',' << csv::format_double(b.q1) << ','
        << csv::format_double(b.q3) << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

void write_comparison_csv(const std::string& path, std::span<const ComparisonRow> rows,
                          const std::string& comment) {
  auto out = open_out(path, comment);
  out << "rank,run_id,arch,overall_mae_mbps,frac_below_10mbps,n_errors\n";
  for (const auto& c : rows) {
    out << c.rank << ',' << c.run_id << ',' << c.arch << ',' << csv::format_double(c.mae) << ','
        << csv::format_double(c.frac_below_10mbps) << ',' << c.n_errors << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

EvalReport read_report_csv(const std::string& path) {
  csv::Reader reader(path);
  std::vector<std::string> cells;
  if (!reader.next(cells)) throw ParseError(path + ": empty report", reader.line());
  csv::expect_header(cells, kReportHeader, reader.line());
  std::vector<TaggedError> errors;
  while (reader.next(cells)) {
    if (cells.size() != kReportHeader.size()) {
      throw ParseError(path + ": expected " + std::to_string(kReportHeader.size()) +
                           " cells, got " + std::to_string(cells.size()),
                       reader.line());
    }
    const auto ln = reader.line();
    TaggedError e;
    e.context_id = static_cast<int>(csv::parse_int(cells[0], ln));
    e.variation_id = static_cast<int>(csv::parse_int(cells[1], ln));
    e.tau = static_cast<int>(csv::parse_int(cells[2], ln));
    e.sta_index = static_cast<int>(csv::parse_int(cells[3], ln));
    e.n_aps = static_cast<int>(csv::parse_int(cells[4], ln));
    e.n_stas = static_cast<int>(csv::parse_int(cells[5], ln));
    e.predicted_mbps = csv::parse_double(cells[6], ln);
    e.label_mbps = csv::parse_double(cells[7], ln);
    e.error = csv::parse_double(cells[8], ln);
    errors.push_back(e);
  }
  std::string run_id;
  std::string arch;
  for (const auto& c : reader.comments()) {
    if (c.rfind("run_id=", 0) == 0) run_id = c.substr(7);
    if (c.rfind("arch=", 0) == 0) arch = c.substr(5);
  }
  return make_report(run_id, arch, std::move(errors));
}

}  // namespace srfl::eval
