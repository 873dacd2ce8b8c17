#include "pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "srfl/checkpoint.hpp"
#include "srfl/csv.hpp"
#include "srfl/random.hpp"

namespace srfl::cli {

using nlohmann::json;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
  if (!out) throw Error("cannot write " + p.string());
}

std::string hash_comment(const std::string& hash) { return "config_hash=" + hash; }

fs::path context_path(const fs::path& dir, int id) {
  return dir / "contexts" / ("context_" + std::to_string(id) + ".csv");
}

fs::path nodes_path(const fs::path& dir, int id, int variation) {
  const std::string stem = "nodes_" + std::to_string(id);
  return dir / "nodes" /
         (variation == 0 ? stem + ".csv" : stem + "_v" + std::to_string(variation) + ".csv");
}

std::vector<int> ids_where(const DatasetManifest& m, bool test) {
  std::vector<int> ids;
  for (const auto& c : m.contexts) {
    if ((c.profile == scenario::ProfileKind::kTest) == test) ids.push_back(c.id);
  }
  return ids;
}

std::vector<data::Context> load_contexts(const fs::path& dir, const DatasetManifest& m,
                                         const std::vector<int>& ids) {
  std::vector<data::Context> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(load_context(dir, m, id));
  return out;
}

}  // namespace

void generate_dataset(const RunConfig& cfg, const fs::path& dir, std::ostream& log) {
  cfg.validate();
  const auto hash = dataset_hash(cfg);
  const auto comment = hash_comment(hash);
  fs::create_directories(dir / "contexts");
  fs::create_directories(dir / "nodes");
  if (cfg.dataset.write_metrics) fs::create_directories(dir / "metrics");

  const auto train_profile = scenario::profile_by_name(cfg.dataset.profile);
  const auto test_profile = scenario::test_profile();
  const int total = cfg.dataset.contexts + cfg.dataset.test_contexts;
  json entries = json::array();
  json counts = json::object();
  for (int k = 0; k < total; ++k) {
    const bool is_test = k >= cfg.dataset.contexts;
    const auto& profile = is_test ? test_profile : train_profile;
    const std::uint64_t seed = mix_seed(cfg.seed, 0xde9107ULL, static_cast<std::uint64_t>(k));
    const auto base = scenario::generate_deployment(profile, seed, cfg.dataset.generator, k);

    const int n_var = is_test ? 1 : cfg.dataset.variations.value_or(profile.location_variations);
    std::vector<scenario::Deployment> variations = {base};
    if (n_var > 1) {
      auto extra = scenario::vary_sta_locations(base, n_var - 1, seed, cfg.dataset.generator);
      for (auto& v : extra) {
        v.variation_id += 1;
        variations.push_back(std::move(v));
      }
    }
    std::vector<int> taus;
    if (is_test) {
      Rng rng(mix_seed(cfg.seed, 0x7e57ULL, static_cast<std::uint64_t>(k)));
      taus.push_back(static_cast<int>(rng.uniform_int(scenario::kObssPdMin, scenario::kObssPdMax)));
    }
    const auto ctx = data::build_context(k, profile.kind, variations, cfg.radio,
                                         cfg.dataset.max_aps, cfg.dataset.max_stas, taus);
    data::write_context_csv(ctx.data, context_path(dir, k), comment);
    for (const auto& v : variations) {
      scenario::write_nodes_csv(v, nodes_path(dir, k, v.variation_id), comment);
    }
    if (cfg.dataset.write_metrics) {
      for (int tau : ctx.data.taus()) {
        const auto m = oracle::simulate_throughput(scenario::with_threshold(base, tau), cfg.radio);
        oracle::write_metrics_csv(
            m, dir / "metrics" / ("metrics_" + std::to_string(k) + "_" + std::to_string(tau) + ".csv"),
            comment);
      }
    }
    const std::string pname(scenario::to_string(profile.kind));
    counts[pname] = counts.value(pname, 0) + 1;
    entries.push_back({{"id", k},
                       {"profile", pname},
                       {"n_aps", base.ap_count()},
                       {"n_stas", ctx.data.n_stas},
                       {"variations", n_var},
                       {"taus", ctx.data.taus()}});
  }
  json manifest = {
      {"format", "srfl-dataset-1"},
      {"config_hash", hash},
      {"config", json::parse(dataset_json(cfg))},
      {"counts", counts},
      {"contexts", entries},
  };
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  log << "generated " << total << " contexts in " << dir.string() << " (config " << hash << ")\n";
}

DatasetManifest read_manifest(const fs::path& dir) {
  const auto path = dir / "manifest.json";
  if (!fs::exists(path)) throw Error("no dataset manifest at " + path.string());
  DatasetManifest m;
  try {
    const auto j = json::parse(read_file(path));
    m.config_hash = j.at("config_hash").get<std::string>();
    apply_json(m.config, j.at("config").dump());
    for (const auto& e : j.at("contexts")) {
      ContextEntry c;
      c.id = e.at("id").get<int>();
      c.profile = scenario::profile_by_name(e.at("profile").get<std::string>()).kind;
      c.n_aps = e.at("n_aps").get<int>();
      c.n_stas = e.at("n_stas").get<int>();
      c.variations = e.at("variations").get<int>();
      m.contexts.push_back(c);
    }
  } catch (const json::exception& e) {
    throw Error("bad dataset manifest " + path.string() + ": " + e.what());
  } catch (const UsageError& e) {
    throw Error("bad dataset manifest " + path.string() + ": " + e.what());
  }
  return m;
}

data::Context load_context(const fs::path& dir, const DatasetManifest& m, int id) {
  const auto it = std::find_if(m.contexts.begin(), m.contexts.end(),
                               [&](const ContextEntry& c) { return c.id == id; });
  if (it == m.contexts.end()) throw Error("context " + std::to_string(id) + " is not in the manifest");
  data::Context ctx;
  ctx.profile = it->profile;
  ctx.data = data::read_context_csv(context_path(dir, id), m.config.dataset.max_stas);
  if (ctx.data.max_aps != m.config.dataset.max_aps) {
    throw Error("context " + std::to_string(id) + " has " + std::to_string(ctx.data.max_aps) +
                " interference columns, manifest declares " +
                std::to_string(m.config.dataset.max_aps));
  }
  for (int v = 0; v < it->variations; ++v) {
    auto d = scenario::read_nodes_csv(nodes_path(dir, id, v));
    d.deployment_id = id;
    d.variation_id = v;
    d.profile = it->profile;
    d.map_width_m = m.config.dataset.generator.map_width_m;
    d.map_height_m = m.config.dataset.generator.map_height_m;
    ctx.deployments.push_back(std::move(d));
  }
  return ctx;
}

void train_run(RunConfig cfg, const fs::path& data_dir, const fs::path& run_dir,
               std::ostream& log) {
  const auto manifest = read_manifest(data_dir);
  cfg.dataset = manifest.config.dataset;
  cfg.radio = manifest.config.radio;
  cfg.model.max_aps = cfg.dataset.max_aps;
  cfg.model.max_stas = cfg.dataset.max_stas;
  cfg.model.init_seed = mix_seed(cfg.seed, 0x1417ULL);
  cfg.fed.seed = cfg.seed;
  cfg.validate();
  const auto hash = config_hash(cfg);

  const auto pool = ids_where(manifest, false);
  const auto split = data::split_contexts(pool, cfg.split, mix_seed(cfg.seed, 0x5917ULL));
  const auto& val_ids = split.val1.empty() ? split.val2 : split.val1;
  if (split.train.empty() || val_ids.empty()) {
    throw ConfigError("training needs non-empty train and validation splits");
  }
  const auto train_raw = load_contexts(data_dir, manifest, split.train);
  const auto val_raw = load_contexts(data_dir, manifest, val_ids);
  std::vector<data::ContextDataset> train_tables;
  for (const auto& c : train_raw) train_tables.push_back(c.data);
  const auto meta = data::fit_normalizer(train_tables);
  const auto normalized = [&](const std::vector<data::Context>& raw) {
    std::vector<data::Context> out = raw;
    for (auto& c : out) c.data = data::normalize(c.data, meta);
    return out;
  };
  const auto train = normalized(train_raw);
  const auto val = normalized(val_raw);

  auto model = models::make_model(cfg.model);
  std::vector<models::SampleSet> val_parts;
  for (const auto& c : val) val_parts.push_back(model->make_samples(c));
  const auto val_samples = models::SampleSet::concat(val_parts);

  log << "training " << models::to_string(cfg.model.arch) << " (" << model->parameter_count()
      << " parameters) on " << train.size() << " contexts, validating on " << val.size()
      << "\n";
  fs::create_directories(run_dir);
  const auto history_path = (run_dir / "history.csv").string();
  const auto print = [&](const fed::RoundRecord& r) {
    log << "round " << r.round << " train_mae " << std::fixed << std::setprecision(4)
        << r.train_mae_mbps;
    if (r.evaluated) log << " val_mae " << r.val_mae_mbps;
    log << std::defaultfloat << "\n";
  };

  std::vector<fed::RoundRecord> history;
  std::vector<double> best_params;
  int best_round = 0;
  bool stopped_early = false;
  if (cfg.model.arch == models::Arch::kCentralizedBaseline) {
    std::vector<models::SampleSet> parts;
    for (const auto& c : train) parts.push_back(model->make_samples(c));
    const auto pooled = models::SampleSet::concat(parts);
    const auto epochs =
        models::train_centralized(*model, pooled, val_samples, meta, cfg.fed.optimizer,
                                  cfg.centralized_epochs, cfg.fed.batch_size, cfg.seed);
    for (const auto& e : epochs) {
      fed::RoundRecord r;
      r.round = e.epoch;
      r.train_mae_mbps = e.train_mae_mbps;
      r.val_mae_mbps = e.val_mae_mbps;
      r.evaluated = true;
      r.n_clients = 0;
      history.push_back(r);
      print(r);
    }
    best_params = model->parameters();
    best_round = static_cast<int>(epochs.size());
  } else {
    auto clients = fed::make_clients(*model, train, cfg.fed.optimizer);
    try {
      const auto result = fed::run_federated(*model, clients, val_samples, meta, cfg.fed, print);
      history = result.last.history;
      best_params = result.best.params;
      best_round = result.best.round;
      stopped_early = result.stopped_early;
    } catch (const fed::DivergenceError& e) {
      fed::write_history_csv(history_path, e.history(), hash_comment(hash));
      throw;
    }
  }
  fed::write_history_csv(history_path, history, hash_comment(hash));

  ckpt::Checkpoint ck;
  ck.model = cfg.model;
  ck.meta = meta;
  ck.params = best_params;
  ck.round = best_round;
  ck.config_hash = hash;
  model->set_parameters(best_params);
  ckpt::save_checkpoint(run_dir / "checkpoint", ck, model->param_layout());

  json run = {
      {"format", "srfl-run-1"},
      {"config_hash", hash},
      {"dataset_hash", manifest.config_hash},
      {"data_dir", fs::absolute(data_dir).lexically_normal().string()},
      {"config", json::parse(to_json(cfg))},
      {"splits", {{"train", split.train}, {"val1", split.val1}, {"val2", split.val2}}},
      {"best_round", best_round},
      {"rounds_run", history.size()},
      {"stopped_early", stopped_early},
  };
  write_file(run_dir / "run.json", run.dump(2) + "\n");
  log << "best round " << best_round << "; wrote " << run_dir.string() << "\n";
}

eval::EvalReport eval_run(const fs::path& run_dir, const std::optional<fs::path>& data_dir,
                          const fs::path& out_dir, bool force, std::ostream& log) {
  json run;
  try {
    run = json::parse(read_file(run_dir / "run.json"));
  } catch (const json::exception& e) {
    throw Error("bad run manifest in " + run_dir.string() + ": " + e.what());
  }
  const auto ck = ckpt::load_checkpoint(run_dir / "checkpoint");
  const auto run_hash = run.at("config_hash").get<std::string>();
  if (ck.config_hash != run_hash) {
    const std::string msg = "checkpoint config hash " + ck.config_hash +
                            " does not match run config hash " + run_hash;
    if (!force) throw ConfigError(msg + " (use --force to override)");
    log << "warning: " << msg << "\n";
  }
  const fs::path data = data_dir ? *data_dir : fs::path(run.at("data_dir").get<std::string>());
  const auto manifest = read_manifest(data);
  const auto expected = run.at("dataset_hash").get<std::string>();
  if (manifest.config_hash != expected) {
    const std::string msg = "dataset config hash " + manifest.config_hash +
                            " does not match the training dataset " + expected;
    if (!force) throw ConfigError(msg + " (use --force to override)");
    log << "warning: " << msg << "\n";
  }
  if (ck.model.max_aps != manifest.config.dataset.max_aps ||
      ck.model.max_stas != manifest.config.dataset.max_stas) {
    throw ConfigError("checkpoint expects a=" + std::to_string(ck.model.max_aps) +
                      ", b=" + std::to_string(ck.model.max_stas) + " but the dataset has a=" +
                      std::to_string(manifest.config.dataset.max_aps) +
                      ", b=" + std::to_string(manifest.config.dataset.max_stas));
  }

  auto test_ids = ids_where(manifest, true);
  if (test_ids.empty()) {
    const auto& splits = run.at("splits");
    test_ids = splits.at("val2").get<std::vector<int>>();
    if (test_ids.empty()) test_ids = splits.at("val1").get<std::vector<int>>();
    log << "no test-profile contexts; evaluating on " << test_ids.size()
        << " held-out training contexts\n";
  }
  if (test_ids.empty()) throw ConfigError("no contexts to evaluate");
  const auto test = load_contexts(data, manifest, test_ids);

  auto model = models::make_model(ck.model);
  model->set_parameters(ck.params);
  const std::string run_id = run_dir.filename().empty() ? run_dir.parent_path().filename().string()
                                                        : run_dir.filename().string();
  auto report = eval::evaluate(*model, test, ck.meta, run_id);

  fs::create_directories(out_dir);
  const auto comment = hash_comment(run_hash);
  eval::write_report_csv((out_dir / ("report_" + run_id + ".csv")).string(), report, comment);
  eval::write_cdf_csv((out_dir / ("cdf_" + run_id + ".csv")).string(), report, comment);
  eval::write_breakdown_csv((out_dir / ("breakdown_" + run_id + ".csv")).string(), report,
                            comment);
  log << "run " << run_id << ": MAE " << std::fixed << std::setprecision(4) << report.overall_mae
      << " Mbps over " << report.errors.size() << " predictions, "
      << eval::fraction_below(report.errors, 10.0) * 100.0 << "% below 10 Mbps\n"
      << std::defaultfloat;
  return report;
}

std::vector<eval::ComparisonRow> compare_run_dirs(const std::vector<fs::path>& run_dirs,
                                                  const fs::path& out_dir, std::ostream& log) {
  std::vector<eval::EvalReport> reports;
  for (const auto& dir : run_dirs) {
    const auto id = dir.filename().empty() ? dir.parent_path().filename().string()
                                           : dir.filename().string();
    const auto path = dir / ("report_" + id + ".csv");
    if (!fs::exists(path)) throw Error("no report at " + path.string() + "; run eval first");
    reports.push_back(eval::read_report_csv(path.string()));
  }
  const auto rows = eval::compare_runs(reports);
  fs::create_directories(out_dir);
  eval::write_comparison_csv((out_dir / "comparison.csv").string(), rows);
  log << std::left << std::setw(6) << "rank" << std::setw(24) << "run" << std::setw(14) << "arch"
      << std::setw(12) << "mae_mbps" << "below_10mbps\n";
  for (const auto& r : rows) {
    log << std::setw(6) << r.rank << std::setw(24) << r.run_id << std::setw(14) << r.arch
        << std::setw(12) << std::fixed << std::setprecision(4) << r.mae
        << std::setprecision(4) << r.frac_below_10mbps << std::defaultfloat << "\n";
  }
  log << std::right;
  return rows;
}

void report_dataset(const fs::path& data_dir, const fs::path& out_dir, int bins,
                    std::ostream& log) {
  const auto manifest = read_manifest(data_dir);
  const auto contexts = load_contexts(data_dir, manifest, ids_where(manifest, false));
  std::vector<data::ContextDataset> tables;
  for (const auto& c : contexts) tables.push_back(c.data);
  const auto table = data::feature_table(tables);
  const auto corr = data::correlation_matrix(table.columns);
  fs::create_directories(out_dir);
  const auto comment = "#" + hash_comment(manifest.config_hash) + "\n";
  {
    std::ostringstream out;
    out << comment << "feature";
    for (const auto& n : table.names) out << ',' << n;
    out << '\n';
    for (std::size_t i = 0; i < corr.size(); ++i) {
      out << table.names[i];
      for (double v : corr[i]) out << ',' << csv::format_double(v);
      out << '\n';
    }
    write_file(out_dir / "correlation.csv", out.str());
  }
  for (std::size_t i = 0; i < table.names.size(); ++i) {
    const auto h = data::histogram(table.columns[i], bins);
    std::ostringstream out;
    out << comment << "bin_lo,bin_hi,count\n";
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      out << csv::format_double(h.edges[b]) << ',' << csv::format_double(h.edges[b + 1]) << ','
          << h.counts[b] << '\n';
    }
    write_file(out_dir / ("histogram_" + table.names[i] + ".csv"), out.str());
  }
  log << "wrote correlation and " << table.names.size() << " histograms for " << contexts.size()
      << " contexts to " << out_dir.string() << "\n";
}

}  // namespace srfl::cli
