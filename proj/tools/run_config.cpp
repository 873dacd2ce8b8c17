#include "run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "srfl/checkpoint.hpp"

namespace srfl::cli {

using nlohmann::json;

namespace {

void check_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw UsageError(std::string(where) + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) throw UsageError("unknown config key '" + std::string(where) + "." + key + "'");
  }
}

template <typename T>
void get(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

models::Activation activation_from(const std::string& s) {
  if (s == "tanh") return models::Activation::kTanh;
  if (s == "relu") return models::Activation::kRelu;
  throw UsageError("unknown activation '" + s + "'");
}

std::string_view to_string(fed::StaNormalization s) {
  return s == fed::StaNormalization::kGlobalConstant ? "global" : "per_context";
}

fed::StaNormalization sta_norm_from(const std::string& s) {
  if (s == "global") return fed::StaNormalization::kGlobalConstant;
  if (s == "per_context") return fed::StaNormalization::kPerContext;
  throw UsageError("unknown sta_normalization '" + s + "'");
}

void apply_model(models::ModelConfig& m, const json& j) {
  check_keys(j, "model",
             {"arch", "hidden_sizes", "branch_hidden", "joint_hidden", "dropout", "activation",
              "cnn_channel_scale", "cnn_out_dim", "fcnn_out_dim", "grid"});
  if (j.contains("arch")) {
    const auto arch = models::arch_from_string(j.at("arch").get<std::string>());
    if (arch != m.arch) {
      auto fresh = models::ModelConfig::defaults(arch);
      fresh.max_aps = m.max_aps;
      fresh.max_stas = m.max_stas;
      fresh.init_seed = m.init_seed;
      m = fresh;
    }
  }
  get(j, "hidden_sizes", m.hidden_sizes);
  get(j, "branch_hidden", m.branch_hidden);
  get(j, "joint_hidden", m.joint_hidden);
  get(j, "dropout", m.dropout_p);
  if (j.contains("activation")) m.activation = activation_from(j.at("activation").get<std::string>());
  get(j, "cnn_channel_scale", m.cnn_channel_scale);
  get(j, "cnn_out_dim", m.cnn_out_dim);
  get(j, "fcnn_out_dim", m.fcnn_out_dim);
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    check_keys(g, "model.grid", {"width", "height", "cell_size_m"});
    get(g, "width", m.grid.width);
    get(g, "height", m.grid.height);
    get(g, "cell_size_m", m.grid.cell_size_m);
  }
}

void apply_fed(fed::FedConfig& f, const json& j) {
  check_keys(j, "fed",
             {"rounds", "local_epochs", "batch_size", "optimizer", "clients_per_round",
              "participation", "aggregation", "sta_normalization", "global_n_sta", "eval_every",
              "patience", "workers", "record_timing"});
  get(j, "rounds", f.rounds);
  get(j, "local_epochs", f.local_epochs);
  get(j, "batch_size", f.batch_size);
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    check_keys(o, "fed.optimizer", {"kind", "learning_rate", "l2", "beta1", "beta2", "epsilon"});
    if (o.contains("kind")) {
      f.optimizer.kind = nn::optimizer_from_string(o.at("kind").get<std::string>());
    }
    get(o, "learning_rate", f.optimizer.learning_rate);
    get(o, "l2", f.optimizer.l2);
    get(o, "beta1", f.optimizer.beta1);
    get(o, "beta2", f.optimizer.beta2);
    get(o, "epsilon", f.optimizer.epsilon);
  }
  get(j, "clients_per_round", f.clients_per_round);
  if (j.contains("participation")) {
    f.participation = fed::participation_from_string(j.at("participation").get<std::string>());
  }
  if (j.contains("aggregation")) {
    f.aggregation = fed::aggregation_from_string(j.at("aggregation").get<std::string>());
  }
  if (j.contains("sta_normalization")) {
    f.sta_normalization = sta_norm_from(j.at("sta_normalization").get<std::string>());
  }
  get(j, "global_n_sta", f.global_n_sta);
  get(j, "eval_every", f.eval_every);
  get(j, "patience", f.patience);
  get(j, "workers", f.workers);
  get(j, "record_timing", f.record_timing);
}

json model_json(const models::ModelConfig& m) {
  return json{
      {"arch", models::to_string(m.arch)},
      {"hidden_sizes", m.hidden_sizes},
      {"branch_hidden", m.branch_hidden},
      {"joint_hidden", m.joint_hidden},
      {"dropout", m.dropout_p},
      {"activation", m.activation == models::Activation::kTanh ? "tanh" : "relu"},
      {"cnn_channel_scale", m.cnn_channel_scale},
      {"cnn_out_dim", m.cnn_out_dim},
      {"fcnn_out_dim", m.fcnn_out_dim},
      {"grid", {{"width", m.grid.width}, {"height", m.grid.height}, {"cell_size_m", m.grid.cell_size_m}}},
  };
}

json dataset_section(const RunConfig& c) {
  const auto& d = c.dataset;
  return json{
      {"profile", d.profile},
      {"contexts", d.contexts},
      {"test_contexts", d.test_contexts},
      {"variations", d.variations ? json(*d.variations) : json(nullptr)},
      {"max_aps", d.max_aps},
      {"max_stas", d.max_stas},
      {"write_metrics", d.write_metrics},
      {"map_width_m", d.generator.map_width_m},
      {"map_height_m", d.generator.map_height_m},
      {"association_radius_m", d.generator.association_radius_m},
  };
}

json radio_section(const oracle::RadioParams& r) {
  return json{
      {"tx_pwr_ref_dbm", r.tx_pwr_ref_dbm},
      {"noise_floor_dbm", r.noise_floor_dbm},
      {"path_loss_exponent", r.path_loss_exponent},
      {"path_loss_at_1m_db", r.path_loss_at_1m_db},
      {"max_phy_rate_mbps", r.max_phy_rate_mbps},
      {"bandwidth_mhz", r.bandwidth_mhz},
      {"spatial_reuse_enabled", r.spatial_reuse_enabled},
  };
}

}  // namespace

void RunConfig::validate() const {
  try {
    scenario::profile_by_name(dataset.profile);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (dataset.profile == "test") throw UsageError("use --test-contexts for test-profile contexts");
  if (dataset.contexts < 1) {
    throw UsageError("--contexts must be at least 1, got " + std::to_string(dataset.contexts));
  }
  if (dataset.test_contexts < 0) throw UsageError("--test-contexts must not be negative");
  if (dataset.variations && (*dataset.variations < 1 || *dataset.variations > 20)) {
    throw UsageError("--variations must lie in [1, 20]");
  }
  if (dataset.max_aps < 2 || dataset.max_aps > 6 || dataset.max_stas < 1 || dataset.max_stas > 4) {
    throw UsageError("max_aps must lie in [2, 6] and max_stas in [1, 4]");
  }
  try {
    radio.validate();
    dataset.generator.validate();
    model.validate();
  } catch (const UsageError&) {
    throw;
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  if (fed.rounds == 0 || fed.batch_size == 0 || fed.eval_every == 0) {
    throw UsageError("rounds, batch size and eval_every must be positive");
  }
  if (fed.patience % fed.eval_every != 0) {
    throw UsageError("patience must be a multiple of eval_every");
  }
  if (fed.workers == 0) throw UsageError("--workers must be at least 1");
  if (!(fed.optimizer.learning_rate > 0.0)) throw UsageError("learning rate must be positive");
}

void apply_preset(RunConfig& cfg, std::string_view name) {
  auto& f = cfg.fed;
  const auto keep_shape = [&](models::Arch arch) {
    auto m = models::ModelConfig::defaults(arch);
    m.max_aps = cfg.model.max_aps;
    m.max_stas = cfg.model.max_stas;
    m.init_seed = cfg.model.init_seed;
    cfg.model = m;
  };
  if (name == "federations") {
    keep_shape(models::Arch::kFederationS);
    f.optimizer = {};
    f.optimizer.kind = nn::OptimizerKind::kAdam;
    f.optimizer.learning_rate = 1e-4;
    f.optimizer.l2 = 1e-5;
    f.batch_size = 21;
    f.local_epochs = 1;
    f.rounds = 250;
    f.clients_per_round = 500;
    f.participation = fed::Participation::kSampled;
    f.aggregation = fed::Aggregation::kFederationsAlpha;
    f.eval_every = 1;
    f.patience = 0;
    cfg.split = {0.95, 0.05, 0.0};
  } else if (name == "fedipc") {
    keep_shape(models::Arch::kFedIpc);
    f.optimizer = {};
    f.optimizer.kind = nn::OptimizerKind::kSgd;
    f.optimizer.learning_rate = 0.05;
    f.batch_size = 21;
    f.local_epochs = 1;
    f.rounds = 1000;
    f.participation = fed::Participation::kFull;
    f.aggregation = fed::Aggregation::kFedAvgUniform;
    f.eval_every = 20;
    f.patience = 100;
    cfg.split = {0.8, 0.1, 0.1};
  } else if (name == "wirelessai") {
    keep_shape(models::Arch::kWirelessAi);
    f.optimizer = {};
    f.optimizer.kind = nn::OptimizerKind::kAdam;
    f.optimizer.learning_rate = 1e-3;
    f.batch_size = 21;
    f.local_epochs = 1;
    f.rounds = 20;
    f.clients_per_round = 10;
    f.participation = fed::Participation::kSampled;
    f.aggregation = fed::Aggregation::kFedAvgUniform;
    f.eval_every = 1;
    f.patience = 0;
    cfg.split = {0.8, 0.1, 0.1};
  } else {
    throw UsageError("unknown preset '" + std::string(name) +
                     "' (expected federations, fedipc or wirelessai)");
  }
  cfg.preset = std::string(name);
}

void apply_json(RunConfig& cfg, std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    check_keys(j, "config",
               {"seed", "preset", "dataset", "radio", "split", "model", "fed",
                "centralized_epochs", "output_dir"});
    if (j.contains("preset")) apply_preset(cfg, j.at("preset").get<std::string>());
    get(j, "seed", cfg.seed);
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      check_keys(d, "dataset",
                 {"profile", "contexts", "test_contexts", "variations", "max_aps", "max_stas",
                  "write_metrics", "map_width_m", "map_height_m", "association_radius_m"});
      get(d, "profile", cfg.dataset.profile);
      get(d, "contexts", cfg.dataset.contexts);
      get(d, "test_contexts", cfg.dataset.test_contexts);
      if (d.contains("variations")) {
        if (d.at("variations").is_null()) {
          cfg.dataset.variations.reset();
        } else {
          cfg.dataset.variations = d.at("variations").get<int>();
        }
      }
      get(d, "max_aps", cfg.dataset.max_aps);
      get(d, "max_stas", cfg.dataset.max_stas);
      get(d, "write_metrics", cfg.dataset.write_metrics);
      get(d, "map_width_m", cfg.dataset.generator.map_width_m);
      get(d, "map_height_m", cfg.dataset.generator.map_height_m);
      get(d, "association_radius_m", cfg.dataset.generator.association_radius_m);
    }
    if (j.contains("radio")) {
      const auto& r = j.at("radio");
      check_keys(r, "radio",
                 {"tx_pwr_ref_dbm", "noise_floor_dbm", "path_loss_exponent", "path_loss_at_1m_db",
                  "max_phy_rate_mbps", "bandwidth_mhz", "spatial_reuse_enabled"});
      get(r, "tx_pwr_ref_dbm", cfg.radio.tx_pwr_ref_dbm);
      get(r, "noise_floor_dbm", cfg.radio.noise_floor_dbm);
      get(r, "path_loss_exponent", cfg.radio.path_loss_exponent);
      get(r, "path_loss_at_1m_db", cfg.radio.path_loss_at_1m_db);
      get(r, "max_phy_rate_mbps", cfg.radio.max_phy_rate_mbps);
      get(r, "bandwidth_mhz", cfg.radio.bandwidth_mhz);
      get(r, "spatial_reuse_enabled", cfg.radio.spatial_reuse_enabled);
    }
    if (j.contains("split")) {
      const auto& s = j.at("split");
      check_keys(s, "split", {"train", "val1", "val2"});
      get(s, "train", cfg.split.train);
      get(s, "val1", cfg.split.val1);
      get(s, "val2", cfg.split.val2);
    }
    if (j.contains("model")) apply_model(cfg.model, j.at("model"));
    if (j.contains("fed")) apply_fed(cfg.fed, j.at("fed"));
    get(j, "centralized_epochs", cfg.centralized_epochs);
    get(j, "output_dir", cfg.output_dir);
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad config value: ") + e.what());
  } catch (const UsageError&) {
    throw;
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  RunConfig cfg;
  apply_json(cfg, ss.str());
  return cfg;
}

std::string dataset_json(const RunConfig& cfg) {
  return json{{"seed", cfg.seed},
              {"dataset", dataset_section(cfg)},
              {"radio", radio_section(cfg.radio)}}
      .dump();
}

std::string to_json(const RunConfig& cfg) {
  const auto& f = cfg.fed;
  json fed_j = {
      {"rounds", f.rounds},
      {"local_epochs", f.local_epochs},
      {"batch_size", f.batch_size},
      {"optimizer",
       {{"kind", nn::to_string(f.optimizer.kind)},
        {"learning_rate", f.optimizer.learning_rate},
        {"l2", f.optimizer.l2},
        {"beta1", f.optimizer.beta1},
        {"beta2", f.optimizer.beta2},
        {"epsilon", f.optimizer.epsilon}}},
      {"clients_per_round", f.clients_per_round},
      {"participation", fed::to_string(f.participation)},
      {"aggregation", fed::to_string(f.aggregation)},
      {"sta_normalization", to_string(f.sta_normalization)},
      {"global_n_sta", f.global_n_sta},
      {"eval_every", f.eval_every},
      {"patience", f.patience},
  };
  json j = {
      {"seed", cfg.seed},
      {"preset", cfg.preset},
      {"dataset", dataset_section(cfg)},
      {"radio", radio_section(cfg.radio)},
      {"split", {{"train", cfg.split.train}, {"val1", cfg.split.val1}, {"val2", cfg.split.val2}}},
      {"model", model_json(cfg.model)},
      {"fed", fed_j},
      {"centralized_epochs", cfg.centralized_epochs},
  };
  return j.dump();
}

std::string config_hash(const RunConfig& cfg) { return ckpt::hash_hex(to_json(cfg)); }
std::string dataset_hash(const RunConfig& cfg) { return ckpt::hash_hex(dataset_json(cfg)); }

std::filesystem::path output_root(const std::string& fallback) {
  if (const char* env = std::getenv("SRFL_OUTPUT_ROOT"); env && *env) return env;
  return fallback;
}

std::filesystem::path resolve_output(const std::string& path, const std::string& fallback_root) {
  const std::filesystem::path p(path);
  if (p.is_absolute()) return p;
  return output_root(fallback_root) / p;
}

}  // namespace srfl::cli
