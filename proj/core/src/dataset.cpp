#include "srfl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "srfl/csv.hpp"
#include "srfl/errors.hpp"
#include "srfl/random.hpp"

namespace srfl::data {

using scenario::Deployment;
using scenario::kBssOfInterest;

std::size_t ContextDataset::n_samples() const {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [](const FeatureRow& r) { return r.mask != 0; }));
}

int ContextDataset::n_aps() const {
  return rows.empty() ? 0 : static_cast<int>(std::lround(rows.front().n_interfering_aps)) + 1;
}

int ContextDataset::n_variations() const {
  std::set<int> ids;
  for (const auto& r : rows) ids.insert(r.variation_id);
  return static_cast<int>(ids.size());
}

std::vector<int> ContextDataset::taus() const {
  std::set<int> ids;
  for (const auto& r : rows) ids.insert(r.tau);
  return {ids.begin(), ids.end()};
}

std::vector<FeatureRow> extract_features(const Deployment& d, const oracle::LinkMetrics& m,
                                         int max_aps, int max_stas, int context_id) {
  const auto stas = d.stas_of(kBssOfInterest);
  const int s_k = static_cast<int>(stas.size());
  const int n_aps = d.ap_count();
  if (s_k > max_stas) {
    throw ConfigError("context " + std::to_string(context_id) + " has " + std::to_string(s_k) +
                      " STAs in BSS_A, more than the configured maximum " +
                      std::to_string(max_stas));
  }
  if (n_aps > max_aps) {
    throw ConfigError("context " + std::to_string(context_id) + " has " +
                      std::to_string(n_aps) + " APs, more than the configured maximum " +
                      std::to_string(max_aps));
  }

  std::vector<double> interference(static_cast<std::size_t>(max_aps), 0.0);
  for (int j = 1; j < n_aps; ++j) {
    interference[static_cast<std::size_t>(j - 1)] =
        m.ap_interference_dbm[static_cast<std::size_t>(kBssOfInterest)][static_cast<std::size_t>(j)];
  }
  const auto& ap = d.ap_of(kBssOfInterest);

  std::vector<FeatureRow> rows;
  rows.reserve(static_cast<std::size_t>(max_stas));
  for (int slot = 0; slot < max_stas; ++slot) {
    FeatureRow r;
    r.context_id = context_id;
    r.variation_id = d.variation_id;
    r.tau = d.tau();
    r.tau_feature = r.tau;
    r.sta_index = slot;
    r.n_stas = s_k;
    r.n_interfering_aps = n_aps - 1;
    r.interference = interference;
    if (slot < s_k) {
      const auto* sta = stas[static_cast<std::size_t>(slot)];
      const auto it = std::find_if(m.stas.begin(), m.stas.end(), [&](const oracle::StaMetrics& s) {
        return s.node_id == sta->node_id;
      });
      if (it == m.stas.end()) throw ConfigError("link metrics missing a BSS_A STA");
      r.mask = 1;
      r.rssi = it->rssi_dbm;
      r.sinr = it->sinr_db;
      r.dist_sta_ap = scenario::distance(sta->position, ap.position);
      r.throughput = it->throughput_mbps;
    } else {
      r.mask = 0;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

Context build_context(int context_id, scenario::ProfileKind profile,
                      std::vector<Deployment> variations, const oracle::RadioParams& params,
                      int max_aps, int max_stas, std::vector<int> taus) {
  if (variations.empty()) throw ConfigError("context needs at least one deployment");
  if (taus.empty()) {
    for (int t = scenario::kObssPdMin; t <= scenario::kObssPdMax; ++t) taus.push_back(t);
  }
  Context ctx;
  ctx.profile = profile;
  ctx.data.context_id = context_id;
  ctx.data.max_aps = max_aps;
  ctx.data.max_stas = max_stas;
  ctx.data.n_stas = static_cast<int>(variations.front().stas_of(kBssOfInterest).size());
  for (const auto& base : variations) {
    for (int tau : taus) {
      const Deployment d = scenario::with_threshold(base, tau);
      const auto metrics = oracle::simulate_throughput(d, params);
      auto rows = extract_features(d, metrics, max_aps, max_stas, context_id);
      ctx.data.rows.insert(ctx.data.rows.end(), std::make_move_iterator(rows.begin()),
                           std::make_move_iterator(rows.end()));
    }
  }
  ctx.deployments = std::move(variations);
  return ctx;
}

std::string_view feature_name(Feature f) {
  switch (f) {
    case Feature::kTau: return "tau";
    case Feature::kRssi: return "rssi";
    case Feature::kSinr: return "sinr";
    case Feature::kDistStaAp: return "dist_sta_ap";
    case Feature::kNStas: return "n_stas";
    case Feature::kNInterferingAps: return "n_interfering_aps";
    case Feature::kInterference: return "interference";
    case Feature::kThroughput: return "throughput";
    case Feature::kCount: break;
  }
  return "?";
}

namespace {

struct RangeAccumulator {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double x) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  Range range() const { return lo <= hi ? Range{lo, hi} : Range{0.0, 0.0}; }
};

int valid_interference_slots(const FeatureRow& r) {
  return std::min(static_cast<int>(std::lround(r.n_interfering_aps)),
                  static_cast<int>(r.interference.size()));
}

template <typename Fn>
ContextDataset transform(const ContextDataset& ds, const NormMeta& meta, Fn fn, bool normalized) {
  ContextDataset out = ds;
  out.normalized = normalized;
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    const auto& src = ds.rows[i];
    auto& dst = out.rows[i];
    dst.tau_feature = fn(meta[Feature::kTau], src.tau_feature);
    dst.n_stas = fn(meta[Feature::kNStas], src.n_stas);
    dst.n_interfering_aps = fn(meta[Feature::kNInterferingAps], src.n_interfering_aps);
    // slot count comes from whichever side holds the raw AP count
    const int slots = valid_interference_slots(normalized ? src : dst);
    for (int s = 0; s < slots; ++s) {
      dst.interference[static_cast<std::size_t>(s)] =
          fn(meta[Feature::kInterference], src.interference[static_cast<std::size_t>(s)]);
    }
    if (src.mask != 0) {
      dst.rssi = fn(meta[Feature::kRssi], src.rssi);
      dst.sinr = fn(meta[Feature::kSinr], src.sinr);
      dst.dist_sta_ap = fn(meta[Feature::kDistStaAp], src.dist_sta_ap);
      dst.throughput = fn(meta[Feature::kThroughput], src.throughput);
    }
  }
  return out;
}

}  // namespace

NormMeta fit_normalizer(std::span<const ContextDataset> pool) {
  std::array<RangeAccumulator, kFeatureCount> acc;
  auto at = [&acc](Feature f) -> RangeAccumulator& { return acc[static_cast<std::size_t>(f)]; };
  std::size_t seen = 0;
  for (const auto& ds : pool) {
    if (ds.normalized) throw ConfigError("cannot fit normalizer on normalized data");
    for (const auto& r : ds.rows) {
      ++seen;
      at(Feature::kTau).add(r.tau_feature);
      at(Feature::kNStas).add(r.n_stas);
      at(Feature::kNInterferingAps).add(r.n_interfering_aps);
      const int slots = valid_interference_slots(r);
      for (int s = 0; s < slots; ++s) {
        at(Feature::kInterference).add(r.interference[static_cast<std::size_t>(s)]);
      }
      if (r.mask == 0) continue;
      at(Feature::kRssi).add(r.rssi);
      at(Feature::kSinr).add(r.sinr);
      at(Feature::kDistStaAp).add(r.dist_sta_ap);
      at(Feature::kThroughput).add(r.throughput);
    }
  }
  if (seen == 0) throw ConfigError("cannot fit normalizer on an empty dataset");
  NormMeta meta;
  for (std::size_t i = 0; i < kFeatureCount; ++i) meta.ranges[i] = acc[i].range();
  return meta;
}

ContextDataset normalize(const ContextDataset& ds, const NormMeta& meta) {
  if (ds.normalized) throw ConfigError("dataset already normalized");
  return transform(ds, meta, [](const Range& r, double x) { return r.apply(x); }, true);
}

ContextDataset denormalize(const ContextDataset& ds, const NormMeta& meta) {
  if (!ds.normalized) throw ConfigError("dataset is not normalized");
  return transform(ds, meta, [](const Range& r, double x) { return r.invert(x); }, false);
}

Normalized min_max_normalize(std::span<const ContextDataset> pool) {
  Normalized out;
  out.meta = fit_normalizer(pool);
  for (const auto& ds : pool) out.datasets.push_back(normalize(ds, out.meta));
  return out;
}

double encode_tau(int tau) noexcept { return (tau + 83.0) / 21.0; }

namespace {

std::size_t cell_index(const scenario::Position& p, const GridOptions& opts) {
  const auto to_cell = [&](double v, int limit) {
    const double c = std::floor(v / opts.cell_size_m);
    return static_cast<int>(std::clamp(c, 0.0, static_cast<double>(limit - 1)));
  };
  const int col = to_cell(p.x, opts.width);
  const int row = to_cell(p.y, opts.height);
  return static_cast<std::size_t>(row) * static_cast<std::size_t>(opts.width) +
         static_cast<std::size_t>(col);
}

}  // namespace

GridImage encode_grid_image(const Deployment& d, int tau, const GridOptions& opts) {
  if (opts.width < 1 || opts.height < 1 || !(opts.cell_size_m > 0.0)) {
    throw ConfigError("invalid grid geometry");
  }
  GridImage img;
  img.width = opts.width;
  img.height = opts.height;
  img.cell_size_m = opts.cell_size_m;
  img.data.assign(static_cast<std::size_t>(opts.width) * static_cast<std::size_t>(opts.height),
                  0.0);
  for (const auto& n : d.nodes) {
    if (!n.is_ap()) continue;
    img.data[cell_index(n.position, opts)] = n.bss_id == kBssOfInterest ? encode_tau(tau) : 1.0;
  }
  for (const auto& n : d.nodes) {
    if (n.is_ap()) continue;
    img.data[cell_index(n.position, opts)] = 2.0;
  }
  return img;
}

void write_grid_csv(const GridImage& img, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (int row = 0; row < img.height; ++row) {
    for (int col = 0; col < img.width; ++col) {
      if (col) out << ',';
      out << csv::format_double(img.at(col, row));
    }
    out << '\n';
  }
}

GridImage read_grid_csv(const std::filesystem::path& path, const GridOptions& opts) {
  csv::Reader reader(path);
  GridImage img;
  img.cell_size_m = opts.cell_size_m;
  std::vector<std::string> cells;
  while (reader.next(cells)) {
    if (img.width == 0) img.width = static_cast<int>(cells.size());
    if (static_cast<int>(cells.size()) != img.width) {
      throw ParseError("row arity mismatch", reader.line());
    }
    for (const auto& c : cells) img.data.push_back(csv::parse_double(c, reader.line()));
    ++img.height;
  }
  return img;
}

FeatureTable feature_table(std::span<const ContextDataset> pool) {
  FeatureTable t;
  const int a = pool.empty() ? 0 : pool.front().max_aps;
  t.names = {"tau", "rssi", "sinr", "dist_sta_ap", "n_stas", "n_interfering_aps"};
  for (int i = 0; i < a; ++i) t.names.push_back("if_" + std::to_string(i));
  t.names.push_back("throughput");
  t.columns.assign(t.names.size(), {});
  for (const auto& ds : pool) {
    for (const auto& r : ds.rows) {
      if (r.mask == 0) continue;
      std::size_t c = 0;
      t.columns[c++].push_back(r.tau_feature);
      t.columns[c++].push_back(r.rssi);
      t.columns[c++].push_back(r.sinr);
      t.columns[c++].push_back(r.dist_sta_ap);
      t.columns[c++].push_back(r.n_stas);
      t.columns[c++].push_back(r.n_interfering_aps);
      for (int i = 0; i < a; ++i) {
        t.columns[c++].push_back(i < static_cast<int>(r.interference.size())
                                     ? r.interference[static_cast<std::size_t>(i)]
                                     : 0.0);
      }
      t.columns[c++].push_back(r.throughput);
    }
  }
  return t;
}

std::vector<std::vector<double>> correlation_matrix(
    const std::vector<std::vector<double>>& columns) {
  if (columns.empty()) throw ConfigError("correlation of an empty table");
  const std::size_t n = columns.front().size();
  if (n < 2) throw ConfigError("correlation needs at least two rows");
  for (const auto& c : columns) {
    if (c.size() != n) throw ShapeError("correlation columns differ in length");
  }
  const std::size_t k = columns.size();
  std::vector<double> mean(k, 0.0);
  std::vector<std::vector<double>> centered(k, std::vector<double>(n));
  std::vector<double> norm(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    for (double v : columns[c]) mean[c] += v;
    mean[c] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      centered[c][i] = columns[c][i] - mean[c];
      norm[c] += centered[c][i] * centered[c][i];
    }
    norm[c] = std::sqrt(norm[c]);
  }
  std::vector<std::vector<double>> corr(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    corr[i][i] = 1.0;
    for (std::size_t j = i + 1; j < k; ++j) {
      double r = 0.0;
      if (norm[i] > 0.0 && norm[j] > 0.0) {
        double dot = 0.0;
        for (std::size_t t = 0; t < n; ++t) dot += centered[i][t] * centered[j][t];
        r = std::clamp(dot / (norm[i] * norm[j]), -1.0, 1.0);
      }
      corr[i][j] = r;
      corr[j][i] = r;
    }
  }
  return corr;
}

Histogram histogram(std::span<const double> values, int bins) {
  if (bins < 1) throw ConfigError("histogram needs at least one bin");
  Histogram h;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  if (values.empty()) {
    h.edges.assign(static_cast<std::size_t>(bins) + 1, 0.0);
    return h;
  }
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it > lo ? *hi_it : lo + 1.0;
  const double width = (hi - lo) / bins;
  for (int i = 0; i <= bins; ++i) h.edges.push_back(lo + width * i);
  for (double v : values) {
    auto idx = static_cast<int>((v - lo) / width);
    idx = std::clamp(idx, 0, bins - 1);
    ++h.counts[static_cast<std::size_t>(idx)];
  }
  return h;
}

Split split_contexts(std::span<const int> context_ids, const SplitFractions& f,
                     std::uint64_t seed) {
  if (f.train < 0.0 || f.val1 < 0.0 || f.val2 < 0.0 ||
      std::abs(f.train + f.val1 + f.val2 - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be non-negative and sum to 1");
  }
  std::set<int> unique(context_ids.begin(), context_ids.end());
  if (unique.size() != context_ids.size()) throw ConfigError("duplicate context ids");

  std::vector<int> ids(context_ids.begin(), context_ids.end());
  std::sort(ids.begin(), ids.end());
  Rng rng(mix_seed(seed, 0x5b117ULL));
  rng.shuffle(ids);

  const auto n = static_cast<double>(ids.size());
  const auto n_val1 = static_cast<std::size_t>(std::llround(f.val1 * n));
  const auto n_val2 = static_cast<std::size_t>(std::llround(f.val2 * n));
  if (n_val1 + n_val2 > ids.size()) throw ConfigError("validation splits exceed context count");
  const std::size_t n_train = ids.size() - n_val1 - n_val2;
  if ((f.train > 0.0 && n_train == 0) || (f.val1 > 0.0 && n_val1 == 0) ||
      (f.val2 > 0.0 && n_val2 == 0)) {
    throw ConfigError("split fractions yield an empty required split for " +
                      std::to_string(ids.size()) + " contexts");
  }
  Split s;
  s.val1.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val1));
  s.val2.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_val1),
                ids.begin() + static_cast<std::ptrdiff_t>(n_val1 + n_val2));
  s.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_val1 + n_val2), ids.end());
  for (auto* part : {&s.train, &s.val1, &s.val2}) std::sort(part->begin(), part->end());
  return s;
}

std::vector<std::string> context_csv_header(int max_aps) {
  std::vector<std::string> h = {"context_id", "variation_id", "tau", "sta_index", "mask",
                                "rssi", "sinr", "dist_sta_ap", "n_stas", "n_interfering_aps"};
  for (int i = 0; i < max_aps; ++i) h.push_back("if_" + std::to_string(i));
  h.push_back("throughput");
  return h;
}

void write_context_csv(const ContextDataset& ds, const std::filesystem::path& path,
                       const std::string& comment) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  if (!comment.empty()) out << '#' << comment << '\n';
  out << csv::join(context_csv_header(ds.max_aps)) << '\n';
  for (const auto& r : ds.rows) {
    out << r.context_id << ',' << r.variation_id << ',' << r.tau << ',' << r.sta_index << ','
        << r.mask << ',' << csv::format_double(r.rssi) << ',' << csv::format_double(r.sinr)
        << ',' << csv::format_double(r.dist_sta_ap) << ',' << csv::format_double(r.n_stas)
        << ',' << csv::format_double(r.n_interfering_aps);
    for (int i = 0; i < ds.max_aps; ++i) {
      out << ',' << csv::format_double(r.interference[static_cast<std::size_t>(i)]);
    }
    out << ',' << csv::format_double(r.throughput) << '\n';
  }
}

ContextDataset read_context_csv(const std::filesystem::path& path, int max_stas) {
  csv::Reader reader(path);
  std::vector<std::string> cells;
  if (!reader.next(cells)) throw ParseError("empty context file " + path.string(), 0);
  int max_aps = 0;
  while (std::find(cells.begin(), cells.end(), "if_" + std::to_string(max_aps)) != cells.end()) {
    ++max_aps;
  }
  const auto header = context_csv_header(max_aps);
  csv::expect_header(cells, header, reader.line());

  ContextDataset ds;
  ds.max_aps = max_aps;
  ds.max_stas = max_stas;
  while (reader.next(cells)) {
    const auto line = reader.line();
    if (cells.size() != header.size()) {
      throw ParseError("row arity mismatch: expected " + std::to_string(header.size()) +
                           " cells, got " + std::to_string(cells.size()),
                       line);
    }
    FeatureRow r;
    r.context_id = static_cast<int>(csv::parse_int(cells[0], line));
    r.variation_id = static_cast<int>(csv::parse_int(cells[1], line));
    r.tau = static_cast<int>(csv::parse_int(cells[2], line));
    r.tau_feature = r.tau;
    r.sta_index = static_cast<int>(csv::parse_int(cells[3], line));
    r.mask = static_cast<int>(csv::parse_int(cells[4], line));
    r.rssi = csv::parse_double(cells[5], line);
    r.sinr = csv::parse_double(cells[6], line);
    r.dist_sta_ap = csv::parse_double(cells[7], line);
    r.n_stas = csv::parse_double(cells[8], line);
    r.n_interfering_aps = csv::parse_double(cells[9], line);
    for (int i = 0; i < max_aps; ++i) {
      r.interference.push_back(csv::parse_double(cells[10 + static_cast<std::size_t>(i)], line));
    }
    r.throughput = csv::parse_double(cells.back(), line);
    if (r.sta_index >= max_stas) {
      throw ParseError("sta_index beyond configured maximum STA count", line);
    }
    ds.rows.push_back(std::move(r));
  }
  if (ds.rows.empty()) throw ParseError("context file has no rows: " + path.string(), 0);
  ds.context_id = ds.rows.front().context_id;
  ds.n_stas = static_cast<int>(std::lround(ds.rows.front().n_stas));
  return ds;
}

}  // namespace srfl::data
