#include "srfl/models.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "srfl/errors.hpp"
#include "srfl/loss.hpp"
#include "srfl/random.hpp"

namespace srfl::models {

using nn::InitScheme;
using nn::LayerSpec;
using nn::ModelGraph;
using nn::Tensor;

std::string_view to_string(Arch arch) {
  switch (arch) {
    case Arch::kFederationS: return "federations";
    case Arch::kFedIpc: return "fedipc";
    case Arch::kWirelessAi: return "wirelessai";
    case Arch::kCentralizedBaseline: return "centralized";
  }
  return "?";
}

Arch arch_from_string(std::string_view name) {
  if (name == "federations") return Arch::kFederationS;
  if (name == "fedipc") return Arch::kFedIpc;
  if (name == "wirelessai") return Arch::kWirelessAi;
  if (name == "centralized") return Arch::kCentralizedBaseline;
  throw ConfigError("unknown model architecture '" + std::string(name) + "'");
}

ModelConfig ModelConfig::defaults(Arch arch) {
  ModelConfig c;
  c.arch = arch;
  switch (arch) {
    case Arch::kFederationS:
      c.activation = Activation::kTanh;
      c.dropout_p = 0.10;
      break;
    case Arch::kFedIpc:
      c.hidden_sizes = {256};
      break;
    case Arch::kWirelessAi:
      break;
    case Arch::kCentralizedBaseline:
      c.hidden_sizes = {1024, 512, 256};
      break;
  }
  return c;
}

void ModelConfig::validate() const {
  if (max_aps < 2 || max_stas < 1) throw ConfigError("max_aps must be >= 2 and max_stas >= 1");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  const auto any_zero = [](const std::vector<std::size_t>& v) {
    return std::find(v.begin(), v.end(), 0) != v.end();
  };
  if (any_zero(hidden_sizes) || any_zero(branch_hidden) || any_zero(joint_hidden)) {
    throw ConfigError("hidden layer widths must be positive");
  }
  if (arch == Arch::kWirelessAi) {
    if (!(cnn_channel_scale > 0.0 && cnn_channel_scale <= 1.0)) {
      throw ConfigError("cnn_channel_scale must lie in (0, 1]");
    }
    if (fcnn_out_dim < static_cast<std::size_t>(max_stas)) {
      throw ConfigError("FCNN output must cover every STA slot");
    }
    if (cnn_out_dim < 2 * static_cast<std::size_t>(max_stas) + static_cast<std::size_t>(max_aps) + 3) {
      throw ConfigError("CNN output too small for its auxiliary targets");
    }
  }
}

std::size_t row_input_width(int max_aps) { return static_cast<std::size_t>(max_aps) + 5; }

std::size_t fedipc_input_width(int max_aps, int max_stas) {
  return static_cast<std::size_t>(max_aps) + 4 * static_cast<std::size_t>(max_stas);
}

namespace {

constexpr std::size_t kBranchOneWidth = 4;  // rssi, sinr, dist, tau

InitScheme init_for(Activation a) {
  return a == Activation::kTanh ? InitScheme::kXavierUniform : InitScheme::kKaimingUniform;
}

LayerSpec activation_layer(Activation a) {
  return a == Activation::kTanh ? LayerSpec::tanh() : LayerSpec::relu();
}

// Dense -> activation [-> dropout] for each width; returns the last node.
ModelGraph::NodeId add_mlp(ModelGraph& g, ModelGraph::NodeId x, std::size_t in,
                           const std::vector<std::size_t>& widths, Activation act, double dropout,
                           const std::string& prefix) {
  for (std::size_t i = 0; i < widths.size(); ++i) {
    x = g.add(LayerSpec::dense(in, widths[i], init_for(act)).named(prefix + std::to_string(i)),
              x);
    x = g.add(activation_layer(act).named(prefix + std::to_string(i) + "_act"), x);
    if (dropout > 0.0) {
      x = g.add(LayerSpec::dropout(dropout).named(prefix + std::to_string(i) + "_drop"), x);
    }
    in = widths[i];
  }
  return x;
}

std::size_t scaled(std::size_t width, double scale, std::size_t floor_width) {
  const auto w = static_cast<std::size_t>(std::lround(static_cast<double>(width) * scale));
  return std::max(w, floor_width);
}

}  // namespace

ModelGraph build_federations(const ModelConfig& cfg) {
  if (cfg.arch != Arch::kFederationS) throw ConfigError("build_federations needs FederationS");
  cfg.validate();
  if (cfg.branch_hidden.empty() || cfg.joint_hidden.empty()) {
    throw ConfigError("FederationS needs branch and joint hidden layers");
  }
  const std::size_t width = row_input_width(cfg.max_aps);
  ModelGraph g;
  const auto in = g.add_input({width}, "features");
  const auto b1_in = g.add(LayerSpec::slice(0, kBranchOneWidth).named("b1_in"), in);
  const auto b2_in = g.add(LayerSpec::slice(kBranchOneWidth, width).named("b2_in"), in);
  const auto b1 = add_mlp(g, b1_in, kBranchOneWidth, cfg.branch_hidden, cfg.activation,
                          cfg.dropout_p, "b1_h");
  const auto b2 = add_mlp(g, b2_in, width - kBranchOneWidth, cfg.branch_hidden, cfg.activation,
                          cfg.dropout_p, "b2_h");
  const auto joined = g.add(LayerSpec::concat().named("concat"), {b1, b2});
  const auto joint = add_mlp(g, joined, 2 * cfg.branch_hidden.back(), cfg.joint_hidden,
                             cfg.activation, cfg.dropout_p, "joint_h");
  const auto out = g.add(
      LayerSpec::dense(cfg.joint_hidden.back(), 1, init_for(cfg.activation)).named("output"),
      joint);
  g.set_output(out);
  g.initialize(cfg.init_seed);
  return g;
}

ModelGraph build_fedipc(const ModelConfig& cfg) {
  if (cfg.arch != Arch::kFedIpc) throw ConfigError("build_fedipc needs FedIPC");
  cfg.validate();
  if (cfg.hidden_sizes.empty()) throw ConfigError("FedIPC needs at least one hidden layer");
  const std::size_t width = fedipc_input_width(cfg.max_aps, cfg.max_stas);
  ModelGraph g;
  const auto in = g.add_input({width}, "features");
  const auto h = add_mlp(g, in, width, cfg.hidden_sizes, Activation::kRelu, cfg.dropout_p, "h");
  const auto out = g.add(
      LayerSpec::dense(cfg.hidden_sizes.back(), static_cast<std::size_t>(cfg.max_stas))
          .named("output"),
      h);
  g.set_output(out);
  g.initialize(cfg.init_seed);
  return g;
}

std::pair<ModelGraph, ModelGraph> build_wirelessai(const ModelConfig& cfg) {
  if (cfg.arch != Arch::kWirelessAi) throw ConfigError("build_wirelessai needs WirelessAI");
  cfg.validate();
  if (cfg.grid.width < 16 || cfg.grid.height < 16) {
    throw ConfigError("grid image " + std::to_string(cfg.grid.width) + "x" +
                      std::to_string(cfg.grid.height) +
                      " is too small for four 2x2 pooling stages (need >= 16x16)");
  }
  const double s = cfg.cnn_channel_scale;
  const std::vector<std::size_t> channels = {scaled(128, s, 1), scaled(256, s, 1),
                                             scaled(512, s, 1), scaled(1024, s, 1),
                                             scaled(2048, s, 1)};
  ModelGraph cnn;
  const auto image = cnn.add_input(
      {1, static_cast<std::size_t>(cfg.grid.height), static_cast<std::size_t>(cfg.grid.width)},
      "image");
  const auto tau = cnn.add_input({1}, "tau");
  auto x = image;
  std::size_t in_ch = 1;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    x = cnn.add(LayerSpec::conv2d(in_ch, channels[i], 3, 1, 1).named("conv" + std::to_string(i)),
                x);
    x = cnn.add(LayerSpec::relu().named("conv" + std::to_string(i) + "_act"), x);
    if (i + 1 < channels.size()) {
      x = cnn.add(LayerSpec::max_pool2d(2, 2).named("pool" + std::to_string(i)), x);
    }
    in_ch = channels[i];
  }
  x = cnn.add(LayerSpec::adaptive_avg_pool().named("avgpool"), x);
  x = cnn.add(LayerSpec::concat().named("tau_concat"), {x, tau});
  const std::vector<std::size_t> fc = {scaled(512, s, cfg.cnn_out_dim),
                                       scaled(64, s, cfg.cnn_out_dim)};
  x = add_mlp(cnn, x, channels.back() + 1, fc, Activation::kRelu, cfg.dropout_p, "fc");
  const auto cnn_out = cnn.add(LayerSpec::dense(fc.back(), cfg.cnn_out_dim).named("cnn_out"), x);
  cnn.set_output(cnn_out);
  cnn.initialize(cfg.init_seed);

  ModelGraph fcnn;
  const auto embed = fcnn.add_input({cfg.cnn_out_dim}, "embedding");
  const auto h = add_mlp(fcnn, embed, cfg.cnn_out_dim, {512, 128, 64}, Activation::kRelu,
                         cfg.dropout_p, "fcnn_h");
  const auto fc_out = fcnn.add(LayerSpec::dense(64, cfg.fcnn_out_dim).named("fcnn_out"), h);
  fcnn.set_output(fc_out);
  fcnn.initialize(mix_seed(cfg.init_seed, 0xfcULL));
  return {std::move(cnn), std::move(fcnn)};
}

ModelGraph build_centralized_baseline(const ModelConfig& cfg) {
  if (cfg.arch != Arch::kCentralizedBaseline) {
    throw ConfigError("build_centralized_baseline needs the centralized architecture");
  }
  cfg.validate();
  if (cfg.hidden_sizes.empty()) throw ConfigError("baseline needs hidden layers");
  const std::size_t width = row_input_width(cfg.max_aps);
  ModelGraph g;
  const auto in = g.add_input({width}, "features");
  const auto h = add_mlp(g, in, width, cfg.hidden_sizes, Activation::kRelu, cfg.dropout_p, "h");
  const auto out = g.add(LayerSpec::dense(cfg.hidden_sizes.back(), 1).named("output"), h);
  g.set_output(out);
  g.initialize(cfg.init_seed);
  return g;
}

SampleSet SampleSet::subset(std::span<const std::size_t> indices) const {
  const auto pick = [&](const Tensor& t) {
    if (t.empty()) return Tensor();
    const std::size_t n = t.dim(0);
    const std::size_t stride = t.size() / n;
    nn::Shape shape = t.shape();
    shape[0] = indices.size();
    Tensor out(shape);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      std::copy_n(t.values().begin() + static_cast<std::ptrdiff_t>(indices[i] * stride), stride,
                  out.values().begin() + static_cast<std::ptrdiff_t>(i * stride));
    }
    return out;
  };
  SampleSet out;
  for (const auto& in : inputs) out.inputs.push_back(pick(in));
  out.target = pick(target);
  out.mask = pick(mask);
  out.aux_target = pick(aux_target);
  out.aux_mask = pick(aux_mask);
  const std::size_t k = outputs();
  for (auto i : indices) {
    for (std::size_t j = 0; j < k; ++j) out.row_index.push_back(row_index[i * k + j]);
  }
  return out;
}

SampleSet SampleSet::concat(std::span<const SampleSet> parts) {
  SampleSet out;
  const auto join = [](const std::vector<const Tensor*>& ts) {
    std::size_t n = 0;
    const Tensor* first = nullptr;
    for (const auto* t : ts) {
      if (t->empty()) continue;
      if (!first) first = t;
      n += t->dim(0);
    }
    if (!first) return Tensor();
    nn::Shape shape = first->shape();
    shape[0] = n;
    std::vector<double> data;
    data.reserve(nn::shape_size(shape));
    for (const auto* t : ts) data.insert(data.end(), t->values().begin(), t->values().end());
    return Tensor(shape, std::move(data));
  };
  if (parts.empty()) return out;
  const std::size_t n_inputs = parts.front().inputs.size();
  for (std::size_t i = 0; i < n_inputs; ++i) {
    std::vector<const Tensor*> ts;
    for (const auto& p : parts) ts.push_back(&p.inputs.at(i));
    out.inputs.push_back(join(ts));
  }
  const auto field = [&](Tensor SampleSet::*member) {
    std::vector<const Tensor*> ts;
    for (const auto& p : parts) ts.push_back(&(p.*member));
    return join(ts);
  };
  out.target = field(&SampleSet::target);
  out.mask = field(&SampleSet::mask);
  out.aux_target = field(&SampleSet::aux_target);
  out.aux_mask = field(&SampleSet::aux_mask);
  for (const auto& p : parts) {
    out.row_index.insert(out.row_index.end(), p.row_index.begin(), p.row_index.end());
  }
  return out;
}

namespace {

void require_normalized(const data::Context& ctx) {
  if (!ctx.data.normalized) throw ConfigError("model samples require a normalized context");
}

// Rows grouped by (variation, tau) in first-appearance order.
std::vector<std::vector<std::size_t>> group_rows(const data::ContextDataset& ds) {
  std::map<std::pair<int, int>, std::size_t> slot;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    const auto key = std::make_pair(ds.rows[i].variation_id, ds.rows[i].tau);
    auto [it, inserted] = slot.emplace(key, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  for (auto& g : groups) {
    std::sort(g.begin(), g.end(), [&](std::size_t a, std::size_t b) {
      return ds.rows[a].sta_index < ds.rows[b].sta_index;
    });
  }
  return groups;
}

double interference_at(const data::FeatureRow& r, int i) {
  return i < static_cast<int>(r.interference.size()) ? r.interference[static_cast<std::size_t>(i)]
                                                     : 0.0;
}

// Per-STA vector: [rssi, sinr, dist, tau | n_stas, if_0..if_{a-2}, n_interfering].
SampleSet row_samples(const data::Context& ctx, int max_aps) {
  require_normalized(ctx);
  const std::size_t width = row_input_width(max_aps);
  std::vector<double> x;
  std::vector<double> y;
  SampleSet s;
  for (std::size_t i = 0; i < ctx.data.rows.size(); ++i) {
    const auto& r = ctx.data.rows[i];
    if (r.mask == 0) continue;
    x.insert(x.end(), {r.rssi, r.sinr, r.dist_sta_ap, r.tau_feature, r.n_stas});
    for (int k = 0; k < max_aps - 1; ++k) x.push_back(interference_at(r, k));
    x.push_back(r.n_interfering_aps);
    y.push_back(r.throughput);
    s.row_index.push_back(static_cast<std::int64_t>(i));
  }
  const std::size_t n = y.size();
  s.inputs.emplace_back(nn::Shape{n, width}, std::move(x));
  s.target = Tensor({n, 1}, std::move(y));
  s.mask = Tensor({n, 1}, 1.0);
  return s;
}

SampleSet fedipc_samples(const data::Context& ctx, int max_aps, int max_stas) {
  require_normalized(ctx);
  const auto b = static_cast<std::size_t>(max_stas);
  const std::size_t width = fedipc_input_width(max_aps, max_stas);
  const auto groups = group_rows(ctx.data);
  const std::size_t n = groups.size();
  SampleSet s;
  Tensor x({n, width});
  s.target = Tensor({n, b});
  s.mask = Tensor({n, b});
  s.row_index.assign(n * b, -1);
  for (std::size_t g = 0; g < n; ++g) {
    const auto& rows = groups[g];
    const auto& first = ctx.data.rows[rows.front()];
    double* xr = x.values().data() + g * width;
    for (int k = 0; k < max_aps; ++k) xr[k] = interference_at(first, k);
    for (auto idx : rows) {
      const auto& r = ctx.data.rows[idx];
      const auto j = static_cast<std::size_t>(r.sta_index);
      if (j >= b) throw ConfigError("STA slot beyond the model's output width");
      double* slot = xr + max_aps + 4 * j;
      if (r.mask != 0) {
        slot[0] = r.rssi;
        slot[1] = r.sinr;
        slot[2] = r.dist_sta_ap;
        slot[3] = r.tau_feature;
        s.target[g * b + j] = r.throughput;
        s.mask[g * b + j] = 1.0;
        s.row_index[g * b + j] = static_cast<std::int64_t>(idx);
      }
    }
  }
  s.inputs.push_back(std::move(x));
  return s;
}

SampleSet wirelessai_samples(const data::Context& ctx, const ModelConfig& cfg) {
  require_normalized(ctx);
  const auto groups = group_rows(ctx.data);
  const std::size_t n = groups.size();
  const auto b = static_cast<std::size_t>(cfg.max_stas);
  const auto a = static_cast<std::size_t>(cfg.max_aps);
  const std::size_t pixels =
      static_cast<std::size_t>(cfg.grid.width) * static_cast<std::size_t>(cfg.grid.height);
  SampleSet s;
  Tensor images({n, 1, static_cast<std::size_t>(cfg.grid.height),
                 static_cast<std::size_t>(cfg.grid.width)});
  Tensor taus({n, 1});
  s.target = Tensor({n, cfg.fcnn_out_dim});
  s.mask = Tensor({n, cfg.fcnn_out_dim});
  s.aux_target = Tensor({n, cfg.cnn_out_dim});
  s.aux_mask = Tensor({n, cfg.cnn_out_dim});
  s.row_index.assign(n * cfg.fcnn_out_dim, -1);
  for (std::size_t g = 0; g < n; ++g) {
    const auto& rows = groups[g];
    const auto& first = ctx.data.rows[rows.front()];
    const auto var = static_cast<std::size_t>(first.variation_id);
    if (var >= ctx.deployments.size()) {
      throw ConfigError("context " + std::to_string(ctx.data.context_id) +
                        " lacks the deployment for variation " + std::to_string(var));
    }
    const auto img = data::encode_grid_image(ctx.deployments[var], first.tau, cfg.grid);
    std::copy(img.data.begin(), img.data.end(),
              images.values().begin() + static_cast<std::ptrdiff_t>(g * pixels));
    taus[g] = first.tau_feature;

    double* aux = s.aux_target.values().data() + g * cfg.cnn_out_dim;
    double* aux_m = s.aux_mask.values().data() + g * cfg.cnn_out_dim;
    // [rssi_0..b-1, sinr_0..b-1, if_0..a-1, tau, n_stas, n_interfering]
    for (std::size_t k = 0; k < a; ++k) {
      aux[2 * b + k] = interference_at(first, static_cast<int>(k));
      aux_m[2 * b + k] = 1.0;
    }
    aux[2 * b + a] = first.tau_feature;
    aux[2 * b + a + 1] = first.n_stas;
    aux[2 * b + a + 2] = first.n_interfering_aps;
    aux_m[2 * b + a] = aux_m[2 * b + a + 1] = aux_m[2 * b + a + 2] = 1.0;
    for (auto idx : rows) {
      const auto& r = ctx.data.rows[idx];
      const auto j = static_cast<std::size_t>(r.sta_index);
      if (r.mask == 0) continue;
      aux[j] = r.rssi;
      aux[b + j] = r.sinr;
      aux_m[j] = aux_m[b + j] = 1.0;
      s.target[g * cfg.fcnn_out_dim + j] = r.throughput;
      s.mask[g * cfg.fcnn_out_dim + j] = 1.0;
      s.row_index[g * cfg.fcnn_out_dim + j] = static_cast<std::int64_t>(idx);
    }
  }
  s.inputs.push_back(std::move(images));
  s.inputs.push_back(std::move(taus));
  return s;
}

class GraphModel final : public Model {
 public:
  GraphModel(ModelConfig cfg, ModelGraph graph) : cfg_(std::move(cfg)), graph_(std::move(graph)) {}

  const ModelConfig& config() const override { return cfg_; }
  std::size_t parameter_count() const override { return graph_.parameter_count(); }
  std::vector<double> parameters() const override { return graph_.flatten(); }
  void set_parameters(std::span<const double> flat) override { graph_.unflatten(flat); }
  std::vector<nn::ParamBlock> param_layout() const override { return graph_.param_blocks(); }

  SampleSet make_samples(const data::Context& ctx) const override {
    if (cfg_.arch == Arch::kFedIpc) return fedipc_samples(ctx, cfg_.max_aps, cfg_.max_stas);
    return row_samples(ctx, cfg_.max_aps);
  }

  double loss_and_gradient(const SampleSet& batch, std::vector<double>& grad,
                           std::uint64_t dropout_seed) override {
    graph_.set_mode(nn::Mode::kTrain);
    graph_.set_dropout_seed(dropout_seed);
    const Tensor pred = graph_.forward(batch.inputs);
    auto loss = nn::mse_loss(pred, batch.target, batch.mask);
    grad = graph_.backward(loss.grad).params;
    return loss.value;
  }

  Tensor predict(const SampleSet& batch) override {
    graph_.set_mode(nn::Mode::kEval);
    return graph_.forward(batch.inputs);
  }

  std::unique_ptr<Model> clone() const override { return std::make_unique<GraphModel>(*this); }

 private:
  ModelConfig cfg_;
  ModelGraph graph_;
};

class WirelessAiModel final : public Model {
 public:
  explicit WirelessAiModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
    std::tie(cnn_, fcnn_) = build_wirelessai(cfg_);
  }

  const ModelConfig& config() const override { return cfg_; }
  std::size_t parameter_count() const override {
    return cnn_.parameter_count() + fcnn_.parameter_count();
  }
  std::vector<double> parameters() const override {
    std::vector<double> p = cnn_.flatten();
    const auto f = fcnn_.parameters();
    p.insert(p.end(), f.begin(), f.end());
    return p;
  }
  void set_parameters(std::span<const double> flat) override {
    if (flat.size() != parameter_count()) {
      throw ShapeError("parameter vector length " + std::to_string(flat.size()) +
                       " does not match model length " + std::to_string(parameter_count()));
    }
    cnn_.unflatten(flat.first(cnn_.parameter_count()));
    fcnn_.unflatten(flat.subspan(cnn_.parameter_count()));
  }
  std::vector<nn::ParamBlock> param_layout() const override {
    auto blocks = cnn_.param_blocks();
    for (auto b : fcnn_.param_blocks()) {
      b.offset += cnn_.parameter_count();
      b.name = "fcnn." + b.name;
      blocks.push_back(std::move(b));
    }
    return blocks;
  }

  SampleSet make_samples(const data::Context& ctx) const override {
    return wirelessai_samples(ctx, cfg_);
  }

  // Joint objective: CNN auxiliary MSE plus FCNN throughput MSE, equal weights.
  double loss_and_gradient(const SampleSet& batch, std::vector<double>& grad,
                           std::uint64_t dropout_seed) override {
    cnn_.set_mode(nn::Mode::kTrain);
    fcnn_.set_mode(nn::Mode::kTrain);
    cnn_.set_dropout_seed(dropout_seed);
    fcnn_.set_dropout_seed(mix_seed(dropout_seed, 1));
    const Tensor embedding = cnn_.forward(batch.inputs);
    const Tensor pred = fcnn_.forward(embedding);
    auto aux = nn::mse_loss(embedding, batch.aux_target, batch.aux_mask);
    auto main = nn::mse_loss(pred, batch.target, batch.mask);
    auto fg = fcnn_.backward(main.grad);
    Tensor embed_grad = aux.grad;
    for (std::size_t i = 0; i < embed_grad.size(); ++i) embed_grad[i] += fg.inputs[0][i];
    auto cg = cnn_.backward(embed_grad);
    grad = std::move(cg.params);
    grad.insert(grad.end(), fg.params.begin(), fg.params.end());
    return aux.value + main.value;
  }

  Tensor predict(const SampleSet& batch) override {
    cnn_.set_mode(nn::Mode::kEval);
    fcnn_.set_mode(nn::Mode::kEval);
    return fcnn_.forward(cnn_.forward(batch.inputs));
  }

  std::unique_ptr<Model> clone() const override {
    return std::make_unique<WirelessAiModel>(*this);
  }

 private:
  ModelConfig cfg_;
  ModelGraph cnn_;
  ModelGraph fcnn_;
};

}  // namespace

std::unique_ptr<Model> make_model(const ModelConfig& cfg) {
  switch (cfg.arch) {
    case Arch::kFederationS: return std::make_unique<GraphModel>(cfg, build_federations(cfg));
    case Arch::kFedIpc: return std::make_unique<GraphModel>(cfg, build_fedipc(cfg));
    case Arch::kCentralizedBaseline:
      return std::make_unique<GraphModel>(cfg, build_centralized_baseline(cfg));
    case Arch::kWirelessAi: return std::make_unique<WirelessAiModel>(cfg);
  }
  throw ConfigError("unknown architecture");
}

double train_minibatch(Model& model, const SampleSet& samples, nn::OptimizerState& state,
                       std::size_t epochs, std::size_t batch_size, std::uint64_t shuffle_seed) {
  const std::size_t n = samples.size();
  if (n == 0 || epochs == 0) return 0.0;
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::vector<std::size_t> order(n);
  std::vector<double> params = model.parameters();
  std::vector<double> grad;
  double last_epoch_loss = 0.0;
  for (std::size_t e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(shuffle_seed, e));
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t stop = std::min(n, start + batch_size);
      const auto idx = std::span<const std::size_t>(order).subspan(start, stop - start);
      const SampleSet batch = samples.subset(idx);
      loss_sum += model.loss_and_gradient(batch, grad, mix_seed(shuffle_seed, e, batches));
      nn::step(params, grad, state);
      model.set_parameters(params);
      ++batches;
    }
    last_epoch_loss = loss_sum / static_cast<double>(batches);
  }
  return last_epoch_loss;
}

std::vector<double> predict_rows(Model& model, const data::Context& normalized) {
  const SampleSet s = model.make_samples(normalized);
  std::vector<double> out(normalized.data.rows.size(), 0.0);
  if (s.size() == 0) return out;
  const Tensor pred = model.predict(s);
  for (std::size_t i = 0; i < s.row_index.size(); ++i) {
    if (s.row_index[i] >= 0) out[static_cast<std::size_t>(s.row_index[i])] = pred[i];
  }
  return out;
}

double mae_mbps(Model& model, const SampleSet& samples, const data::NormMeta& meta) {
  if (samples.size() == 0) return 0.0;
  const Tensor pred = model.predict(samples);
  double sum = 0.0;
  double count = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (samples.mask[i] == 0.0) continue;
    sum += std::abs(meta.denormalize_label(pred[i]) - meta.denormalize_label(samples.target[i]));
    count += 1.0;
  }
  return count == 0.0 ? 0.0 : sum / count;
}

int best_threshold(std::span<const data::FeatureRow> rows, std::span<const double> predicted,
                   int variation_id) {
  if (rows.size() != predicted.size()) throw ShapeError("predictions do not match rows");
  std::map<int, double> sums;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].variation_id != variation_id) continue;
    auto& s = sums[rows[i].tau];
    if (rows[i].mask != 0) s += predicted[i];
  }
  if (sums.empty()) throw ConfigError("no rows for variation " + std::to_string(variation_id));
  // Ascending tau order; strict comparison keeps the smaller tau on ties.
  int best = sums.begin()->first;
  double best_sum = sums.begin()->second;
  for (const auto& [tau, sum] : sums) {
    if (sum > best_sum) {
      best = tau;
      best_sum = sum;
    }
  }
  return best;
}

int predict_best_threshold(Model& model, const data::Context& normalized,
                           const data::NormMeta& meta, int variation_id) {
  auto pred = predict_rows(model, normalized);
  for (auto& p : pred) p = meta.denormalize_label(p);
  return best_threshold(normalized.data.rows, pred, variation_id);
}

std::vector<EpochRecord> train_centralized(Model& model, const SampleSet& train,
                                           const SampleSet& val, const data::NormMeta& meta,
                                           const nn::OptimizerConfig& opt, std::size_t epochs,
                                           std::size_t batch_size, std::uint64_t seed) {
  nn::OptimizerState state(opt);
  std::vector<EpochRecord> history;
  for (std::size_t e = 0; e < epochs; ++e) {
    train_minibatch(model, train, state, 1, batch_size, mix_seed(seed, 0xce47ULL, e));
    EpochRecord rec;
    rec.epoch = static_cast<int>(e + 1);
    rec.train_mae_mbps = mae_mbps(model, train, meta);
    rec.val_mae_mbps = mae_mbps(model, val, meta);
    if (!std::isfinite(rec.val_mae_mbps)) throw NumericError("validation MAE diverged");
    history.push_back(rec);
  }
  return history;
}

}  // namespace srfl::models
