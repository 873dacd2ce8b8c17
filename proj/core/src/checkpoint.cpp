#include "srfl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "srfl/errors.hpp"

namespace srfl::ckpt {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little endian");

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::string_view bytes) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(bytes);
  return os.str();
}

namespace {

json to_json(const models::ModelConfig& c) {
  return json{
      {"arch", models::to_string(c.arch)},
      {"hidden_sizes", c.hidden_sizes},
      {"branch_hidden", c.branch_hidden},
      {"joint_hidden", c.joint_hidden},
      {"dropout", c.dropout_p},
      {"activation", c.activation == models::Activation::kTanh ? "tanh" : "relu"},
      {"max_aps", c.max_aps},
      {"max_stas", c.max_stas},
      {"cnn_channel_scale", c.cnn_channel_scale},
      {"cnn_out_dim", c.cnn_out_dim},
      {"fcnn_out_dim", c.fcnn_out_dim},
      {"grid", {{"width", c.grid.width}, {"height", c.grid.height}, {"cell_size_m", c.grid.cell_size_m}}},
      {"init_seed", c.init_seed},
  };
}

models::ModelConfig model_from_json(const json& j) {
  auto c = models::ModelConfig::defaults(models::arch_from_string(j.at("arch").get<std::string>()));
  const auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("hidden_sizes", c.hidden_sizes);
  get("branch_hidden", c.branch_hidden);
  get("joint_hidden", c.joint_hidden);
  get("dropout", c.dropout_p);
  if (j.contains("activation")) {
    const auto a = j.at("activation").get<std::string>();
    if (a == "tanh") {
      c.activation = models::Activation::kTanh;
    } else if (a == "relu") {
      c.activation = models::Activation::kRelu;
    } else {
      throw ConfigError("unknown activation '" + a + "'");
    }
  }
  get("max_aps", c.max_aps);
  get("max_stas", c.max_stas);
  get("cnn_channel_scale", c.cnn_channel_scale);
  get("cnn_out_dim", c.cnn_out_dim);
  get("fcnn_out_dim", c.fcnn_out_dim);
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    if (g.contains("width")) g.at("width").get_to(c.grid.width);
    if (g.contains("height")) g.at("height").get_to(c.grid.height);
    if (g.contains("cell_size_m")) g.at("cell_size_m").get_to(c.grid.cell_size_m);
  }
  get("init_seed", c.init_seed);
  c.validate();
  return c;
}

json to_json(const data::NormMeta& m) {
  json out = json::object();
  for (std::size_t i = 0; i < data::kFeatureCount; ++i) {
    const auto f = static_cast<data::Feature>(i);
    out[std::string(data::feature_name(f))] = {m[f].min, m[f].max};
  }
  return out;
}

data::NormMeta meta_from_json(const json& j) {
  data::NormMeta m;
  for (std::size_t i = 0; i < data::kFeatureCount; ++i) {
    const auto f = static_cast<data::Feature>(i);
    const std::string name(data::feature_name(f));
    if (!j.contains(name)) throw ConfigError("normalization metadata lacks '" + name + "'");
    const auto& r = j.at(name);
    m[f].min = r.at(0).get<double>();
    m[f].max = r.at(1).get<double>();
  }
  return m;
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string model_config_to_json(const models::ModelConfig& cfg) { return to_json(cfg).dump(); }

models::ModelConfig model_config_from_json(std::string_view text) {
  try {
    return model_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
}

std::string norm_meta_to_json(const data::NormMeta& meta) { return to_json(meta).dump(); }

data::NormMeta norm_meta_from_json(std::string_view text) {
  try {
    return meta_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad normalization metadata: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& c,
                     const std::vector<nn::ParamBlock>& layout) {
  std::filesystem::create_directories(dir);
  const std::string bytes(reinterpret_cast<const char*>(c.params.data()),
                          c.params.size() * sizeof(double));
  json blocks = json::array();
  for (const auto& b : layout) {
    blocks.push_back({{"name", b.name}, {"offset", b.offset}, {"weight_shape", b.weight_shape},
                      {"bias", b.bias_size}});
  }
  json manifest = {
      {"format", "srfl-checkpoint-1"},
      {"arch", models::to_string(c.model.arch)},
      {"round", c.round},
      {"config_hash", c.config_hash},
      {"length", c.params.size()},
      {"dtype", "float64-le"},
      {"checksum", hash_hex(bytes)},
      {"model", to_json(c.model)},
      {"normalization", to_json(c.meta)},
      {"blocks", blocks},
  };
  {
    std::ofstream out(dir / "checkpoint.bin", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing " + (dir / "checkpoint.bin").string());
  }
  std::ofstream out(dir / "checkpoint.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw Error("failed writing " + (dir / "checkpoint.json").string());
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_text(dir / "checkpoint.json"));
  } catch (const json::exception& e) {
    throw ConfigError("bad checkpoint manifest in " + dir.string() + ": " + e.what());
  }
  Checkpoint c;
  try {
    c.model = model_from_json(manifest.at("model"));
    c.meta = meta_from_json(manifest.at("normalization"));
    c.round = manifest.at("round").get<int>();
    c.config_hash = manifest.at("config_hash").get<std::string>();
    if (manifest.at("arch").get<std::string>() != models::to_string(c.model.arch)) {
      throw ConfigError("checkpoint arch tag disagrees with its model config");
    }
    const auto length = manifest.at("length").get<std::size_t>();
    const std::string bytes = read_text(dir / "checkpoint.bin");
    if (bytes.size() != length * sizeof(double)) {
      throw ConfigError("checkpoint holds " + std::to_string(bytes.size() / sizeof(double)) +
                        " parameters, manifest declares " + std::to_string(length));
    }
    if (hash_hex(bytes) != manifest.at("checksum").get<std::string>()) {
      throw ConfigError("checkpoint checksum mismatch in " + dir.string());
    }
    c.params.resize(length);
    std::memcpy(c.params.data(), bytes.data(), bytes.size());
  } catch (const json::exception& e) {
    throw ConfigError("bad checkpoint manifest in " + dir.string() + ": " + e.what());
  }
  const auto expected = models::make_model(c.model)->parameter_count();
  if (expected != c.params.size()) {
    throw ConfigError("checkpoint has " + std::to_string(c.params.size()) +
                      " parameters but its architecture needs " + std::to_string(expected));
  }
  return c;
}

}  // namespace srfl::ckpt
