#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "srfl/errors.hpp"
#include "srfl/models.hpp"

using namespace srfl;
using namespace srfl::models;
using nn::LayerKind;
using nn::Tensor;

namespace {

struct Prepared {
  std::vector<data::Context> raw;
  std::vector<data::Context> norm;
  data::NormMeta meta;
};

Prepared prepare(int n, int variations, std::uint64_t seed, scenario::ScenarioProfile profile =
                                                                 scenario::training3()) {
  Prepared p;
  std::vector<data::ContextDataset> tables;
  for (int k = 0; k < n; ++k) {
    const auto s = seed + static_cast<std::uint64_t>(k);
    auto base = scenario::generate_deployment(profile, s, {}, k);
    auto vars = scenario::vary_sta_locations(base, variations, s);
    p.raw.push_back(data::build_context(k, profile.kind, vars, {}, 6, 4));
    tables.push_back(p.raw.back().data);
  }
  p.meta = data::fit_normalizer(tables);
  for (const auto& c : p.raw) {
    auto nc = c;
    nc.data = data::normalize(c.data, p.meta);
    p.norm.push_back(std::move(nc));
  }
  return p;
}

std::ptrdiff_t find_node(const nn::ModelGraph& g, const std::string& name) {
  for (std::size_t i = 0; i < g.nodes().size(); ++i) {
    if (g.nodes()[i].spec.name == name) return static_cast<std::ptrdiff_t>(i);
  }
  return -1;
}

nn::ParamBlock block_named(const std::vector<nn::ParamBlock>& blocks, const std::string& n) {
  for (const auto& b : blocks) {
    if (b.name == n) return b;
  }
  throw std::runtime_error("no block " + n);
}

std::size_t count_kind(const nn::ModelGraph& g, LayerKind k) {
  return static_cast<std::size_t>(std::count_if(g.nodes().begin(), g.nodes().end(),
                                                [k](const auto& n) { return n.spec.kind == k; }));
}

// Echoes the stored labels, i.e. a perfect predictor.
class LabelModel final : public Model {
 public:
  explicit LabelModel(ModelConfig cfg) : inner_(make_model(cfg)) {}
  const ModelConfig& config() const override { return inner_->config(); }
  std::size_t parameter_count() const override { return 0; }
  std::vector<double> parameters() const override { return {}; }
  void set_parameters(std::span<const double>) override {}
  std::vector<nn::ParamBlock> param_layout() const override { return {}; }
  SampleSet make_samples(const data::Context& c) const override { return inner_->make_samples(c); }
  double loss_and_gradient(const SampleSet&, std::vector<double>& g, std::uint64_t) override {
    g.clear();
    return 0.0;
  }
  Tensor predict(const SampleSet& batch) override { return batch.target; }
  std::unique_ptr<Model> clone() const override {
    return std::make_unique<LabelModel>(inner_->config());
  }

 private:
  std::unique_ptr<Model> inner_;
};

int brute_force_best(const data::ContextDataset& ds, const std::vector<double>& values, int var) {
  int best = 0;
  double best_sum = -1e300;
  for (int tau = -82; tau <= -62; ++tau) {
    double sum = 0.0;
    bool seen = false;
    for (std::size_t i = 0; i < ds.rows.size(); ++i) {
      const auto& r = ds.rows[i];
      if (r.variation_id == var && r.tau == tau) {
        seen = true;
        if (r.mask) sum += values[i];
      }
    }
    if (seen && sum > best_sum) {
      best_sum = sum;
      best = tau;
    }
  }
  return best;
}

double grad_rel_error(Model& m, const SampleSet& batch, Rng& rng, std::size_t probes) {
  std::vector<double> grad;
  m.loss_and_gradient(batch, grad, 5);
  auto p = m.parameters();
  std::vector<double> a, n;
  const double h = 1e-5;
  for (std::size_t k = 0; k < probes; ++k) {
    const auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(p.size() - 1)));
    const double keep = p[i];
    std::vector<double> scratch;
    p[i] = keep + h;
    m.set_parameters(p);
    const double up = m.loss_and_gradient(batch, scratch, 5);
    p[i] = keep - h;
    m.set_parameters(p);
    const double down = m.loss_and_gradient(batch, scratch, 5);
    p[i] = keep;
    m.set_parameters(p);
    a.push_back(grad[i]);
    n.push_back((up - down) / (2 * h));
  }
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nb += n[i] * n[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nb), 1e-12);
}

}  // namespace

TEST_SUITE("models") {

TEST_CASE("architecture names") {
  for (auto a : {Arch::kFederationS, Arch::kFedIpc, Arch::kWirelessAi, Arch::kCentralizedBaseline}) {
    CHECK(arch_from_string(to_string(a)) == a);
  }
  CHECK_THROWS_AS(arch_from_string("transformer"), ConfigError);
}

TEST_CASE("FederationS accepts 11 inputs and keeps idle branch neurons at zero") {
  const auto cfg = ModelConfig::defaults(Arch::kFederationS);
  CHECK(cfg.activation == Activation::kTanh);
  CHECK(cfg.dropout_p == 0.10);
  CHECK(row_input_width(cfg.max_aps) == 11);
  auto g = build_federations(cfg);
  CHECK(g.input_shape() == nn::Shape{11});
  CHECK(g.output_shape() == nn::Shape{1});
  Rng rng(2);
  Tensor x({3, 11});
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) x[i * 11 + j] = rng.uniform(0.0, 1.0);
  }
  CHECK_NOTHROW(g.forward(x));
  for (const char* name : {"b2_h0_act", "b2_h1_act"}) {
    const auto id = find_node(g, name);
    REQUIRE(id >= 0);
    CHECK(g.nodes()[static_cast<std::size_t>(id)].spec.kind == LayerKind::kTanh);
    for (double v : g.activation(static_cast<std::size_t>(id)).values()) CHECK(v == 0.0);
  }
  CHECK_THROWS_AS(g.forward(Tensor({3, 10})), ShapeError);

  // tanh everywhere, dropout 0.1 after every hidden layer
  CHECK(count_kind(g, LayerKind::kRelu) == 0);
  CHECK(count_kind(g, LayerKind::kTanh) == 6);
  CHECK(count_kind(g, LayerKind::kDropout) == 6);
  for (const auto& n : g.nodes()) {
    if (n.spec.kind == LayerKind::kDropout) CHECK(n.spec.dropout_p == 0.10);
  }
}

TEST_CASE("FederationS branches meet only at the concat layer") {
  const auto g = build_federations(ModelConfig::defaults(Arch::kFederationS));
  const auto b1 = static_cast<std::size_t>(find_node(g, "b1_in"));
  const auto b2 = static_cast<std::size_t>(find_node(g, "b2_in"));
  const auto concat = static_cast<std::size_t>(find_node(g, "concat"));
  CHECK(g.nodes()[b1].spec.begin == 0);
  CHECK(g.nodes()[b1].spec.end == 4);
  CHECK(g.nodes()[b2].spec.end == 11);
  std::vector<std::set<std::size_t>> roots(g.nodes().size());
  for (std::size_t i = 0; i < g.nodes().size(); ++i) {
    if (i == b1 || i == b2) roots[i] = {i};
    for (auto in : g.nodes()[i].inputs) roots[i].insert(roots[in].begin(), roots[in].end());
    if (i < concat) CHECK(roots[i].size() <= 1);
  }
  CHECK(roots[concat].size() == 2);
  CHECK(g.nodes()[concat].inputs.size() == 2);
}

TEST_CASE("initialization is seeded") {
  auto cfg = ModelConfig::defaults(Arch::kFederationS);
  cfg.init_seed = 17;
  CHECK(build_federations(cfg).flatten() == build_federations(cfg).flatten());
  auto other = cfg;
  other.init_seed = 18;
  CHECK_FALSE(build_federations(cfg).flatten() == build_federations(other).flatten());
}

TEST_CASE("FedIPC shape, zero input and masked gradients") {
  const auto cfg = ModelConfig::defaults(Arch::kFedIpc);
  CHECK(cfg.hidden_sizes == std::vector<std::size_t>{256});
  auto g = build_fedipc(cfg);
  CHECK(g.input_shape() == nn::Shape{6 + 4 * 4});
  CHECK(g.output_shape() == nn::Shape{4});
  CHECK(count_kind(g, LayerKind::kRelu) == 1);

  const auto out_block = block_named(g.param_blocks(), "output");
  const Tensor y = g.forward(Tensor({2, 22}, 0.0));
  auto p = g.flatten();
  Rng rng(6);
  const std::size_t bias_at = out_block.offset + 4 * 256;
  for (std::size_t j = 0; j < 4; ++j) p[bias_at + j] = rng.uniform(-0.1, 0.1);  // non-zero output bias
  g.unflatten(p);
  const Tensor y2 = g.forward(Tensor({2, 22}, 0.0));
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(y[r * 4 + j] == 0.0);
      CHECK(y2[r * 4 + j] == p[bias_at + j]);
    }
  }

  auto model = make_model(cfg);
  const auto blk = block_named(model->param_layout(), "output");
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform_int(0, 7));
    SampleSet s;
    s.inputs.push_back(Tensor({n, 22}));
    for (auto& v : s.inputs[0].values()) v = rng.uniform(0.0, 1.0);
    s.target = Tensor({n, 4});
    for (auto& v : s.target.values()) v = rng.uniform(0.0, 1.0);
    s.mask = Tensor({n, 4});
    for (std::size_t i = 0; i < n; ++i) s.mask[i * 4] = s.mask[i * 4 + 1] = 1.0;  // s_k = 2
    std::vector<double> grad;
    model->loss_and_gradient(s, grad, static_cast<std::uint64_t>(trial));
    for (std::size_t j = 2; j < 4; ++j) {
      for (std::size_t k = 0; k < 256; ++k) CHECK(grad[blk.offset + j * 256 + k] == 0.0);
      CHECK(grad[blk.offset + 4 * 256 + j] == 0.0);
    }
    double live = 0.0;
    for (std::size_t k = 0; k < 256; ++k) live += std::abs(grad[blk.offset + k]);
    CHECK(live > 0.0);
  }
}

TEST_CASE("WirelessAI CNN layer table and scaling") {
  auto full = ModelConfig::defaults(Arch::kWirelessAi);
  full.cnn_channel_scale = 1.0;
  auto [cnn_full, fcnn_full] = build_wirelessai(full);
  const std::size_t table_layers = count_kind(cnn_full, LayerKind::kConv2d) +
                                   count_kind(cnn_full, LayerKind::kMaxPool2d) +
                                   count_kind(cnn_full, LayerKind::kAdaptiveAvgPool) +
                                   count_kind(cnn_full, LayerKind::kDense);
  CHECK(table_layers == 13);
  const std::vector<nn::Shape> expected = {
      {128, 100, 100}, {256, 50, 50}, {512, 25, 25}, {1024, 12, 12}, {2048, 6, 6}};
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto id = find_node(cnn_full, "conv" + std::to_string(i));
    REQUIRE(id >= 0);
    CHECK(cnn_full.nodes()[static_cast<std::size_t>(id)].out_shape == expected[i]);
  }
  CHECK(cnn_full.output_shape() == nn::Shape{17});
  CHECK(fcnn_full.input_shape() == nn::Shape{17});
  CHECK(fcnn_full.output_shape() == nn::Shape{6});
  std::vector<std::size_t> fcnn_widths;
  for (const auto& b : fcnn_full.param_blocks()) fcnn_widths.push_back(b.weight_shape[0]);
  CHECK(fcnn_widths == std::vector<std::size_t>{512, 128, 64, 6});

  const auto small = ModelConfig::defaults(Arch::kWirelessAi);
  CHECK(small.cnn_channel_scale == 1.0 / 16.0);
  auto [cnn, fcnn] = build_wirelessai(small);
  CHECK(count_kind(cnn, LayerKind::kConv2d) == 5);
  CHECK(count_kind(cnn, LayerKind::kMaxPool2d) == 4);
  CHECK(cnn.parameter_count() * 200 < cnn_full.parameter_count());
  CHECK(cnn.output_shape() == nn::Shape{17});
  for (const auto& n : cnn.nodes()) {
    if (n.spec.kind == LayerKind::kTanh) FAIL("CNN should use ReLU only");
  }

  Rng rng(3);
  Tensor img({2, 1, 100, 100});
  for (auto& v : img.values()) v = rng.bernoulli(0.01) ? 2.0 : 0.0;
  const std::vector<Tensor> in = {img, Tensor({2, 1}, 0.5)};
  const Tensor emb = cnn.forward(in);
  CHECK(emb.shape() == nn::Shape{2, 17});
  CHECK(fcnn.forward(emb).shape() == nn::Shape{2, 6});

  auto tiny = small;
  tiny.grid = {8, 8, 0.8};
  CHECK_THROWS_AS(build_wirelessai(tiny), ConfigError);
}

TEST_CASE("centralized baseline widths") {
  const auto cfg = ModelConfig::defaults(Arch::kCentralizedBaseline);
  CHECK(cfg.hidden_sizes == std::vector<std::size_t>{1024, 512, 256});
  const auto g = build_centralized_baseline(cfg);
  std::vector<std::size_t> widths;
  for (const auto& b : g.param_blocks()) widths.push_back(b.weight_shape[0]);
  CHECK(widths == std::vector<std::size_t>{1024, 512, 256, 1});
  CHECK(count_kind(g, LayerKind::kRelu) == 3);
  CHECK(count_kind(g, LayerKind::kTanh) == 0);
  // every hidden dense layer feeds a ReLU
  for (std::size_t i = 0; i + 1 < g.nodes().size(); ++i) {
    if (g.nodes()[i].spec.kind == LayerKind::kDense) {
      CHECK(g.nodes()[i + 1].spec.kind == LayerKind::kRelu);
    }
  }
}

TEST_CASE("builders reject the wrong architecture") {
  CHECK_THROWS_AS(build_fedipc(ModelConfig::defaults(Arch::kFederationS)), ConfigError);
  CHECK_THROWS_AS(build_federations(ModelConfig::defaults(Arch::kFedIpc)), ConfigError);
  auto bad = ModelConfig::defaults(Arch::kFedIpc);
  bad.dropout_p = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("every architecture round-trips its parameters and predicts") {
  const auto prep = prepare(2, 2, 300);
  for (auto arch : {Arch::kFederationS, Arch::kFedIpc, Arch::kWirelessAi, Arch::kCentralizedBaseline}) {
    auto cfg = ModelConfig::defaults(arch);
    cfg.grid = {32, 32, 2.5};
    if (arch == Arch::kCentralizedBaseline) cfg.hidden_sizes = {32, 16};
    auto m = make_model(cfg);
    auto p = m->parameters();
    CHECK(p.size() == m->parameter_count());
    Rng rng(1);
    auto q = testing::random_vector(rng, p.size(), -0.1, 0.1);
    m->set_parameters(q);
    CHECK(m->parameters() == q);
    CHECK_THROWS_AS(m->set_parameters(std::vector<double>(3)), ShapeError);
    std::size_t covered = 0;
    for (const auto& b : m->param_layout()) covered += b.size();
    CHECK(covered == p.size());

    const auto s = m->make_samples(prep.norm[0]);
    const Tensor y = m->predict(s);
    CHECK(y.dim(0) == s.size());
    const auto rows = predict_rows(*m, prep.norm[0]);
    CHECK(rows.size() == prep.norm[0].data.rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!prep.norm[0].data.rows[i].mask) CHECK(rows[i] == 0.0);
    }
    CHECK_THROWS_AS(m->make_samples(prep.raw[0]), ConfigError);
    auto c = m->clone();
    c->set_parameters(p);
    CHECK(m->parameters() == q);
  }
}

TEST_CASE("sample definitions") {
  const auto prep = prepare(1, 3, 310);
  const auto& ctx = prep.norm[0];
  const auto n_rows = ctx.data.n_samples();

  auto fs = make_model(ModelConfig::defaults(Arch::kFederationS))->make_samples(ctx);
  CHECK(fs.size() == n_rows);
  CHECK(fs.outputs() == 1);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const auto& r = ctx.data.rows[static_cast<std::size_t>(fs.row_index[i])];
    CHECK(fs.inputs[0][i * 11 + 0] == r.rssi);
    CHECK(fs.inputs[0][i * 11 + 3] == r.tau_feature);
    CHECK(fs.inputs[0][i * 11 + 4] == r.n_stas);
    CHECK(fs.inputs[0][i * 11 + 10] == r.n_interfering_aps);
    CHECK(fs.target[i] == r.throughput);
  }

  auto ipc = make_model(ModelConfig::defaults(Arch::kFedIpc))->make_samples(ctx);
  CHECK(ipc.size() == 21u * 3u);
  CHECK(ipc.outputs() == 4);
  double mask_sum = 0.0;
  for (double v : ipc.mask.values()) mask_sum += v;
  CHECK(mask_sum == static_cast<double>(n_rows));

  auto wcfg = ModelConfig::defaults(Arch::kWirelessAi);
  wcfg.grid = {32, 32, 2.5};
  auto wa = make_model(wcfg)->make_samples(ctx);
  CHECK(wa.size() == 21u * 3u);
  CHECK(wa.inputs.size() == 2);
  CHECK(wa.aux_target.dim(1) == 17);
  CHECK(wa.outputs() == 6);

  const std::vector<std::size_t> pick = {2, 0};
  const auto sub = ipc.subset(pick);
  CHECK(sub.size() == 2);
  CHECK(sub.target[0] == ipc.target[8]);
  CHECK(sub.row_index[4] == ipc.row_index[0]);
  const std::vector<SampleSet> parts = {sub, ipc};
  const auto joined = SampleSet::concat(parts);
  CHECK(joined.size() == 2 + ipc.size());
  CHECK(joined.row_index.size() == joined.size() * 4);
}

TEST_CASE("best threshold tie rules") {
  const auto prep = prepare(1, 1, 320, scenario::training2());
  const auto& rows = prep.raw[0].data.rows;
  std::vector<double> equal(rows.size(), 7.0);
  CHECK(best_threshold(rows, equal, 0) == -82);
  std::vector<double> rising(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rising[i] = rows[i].tau + 100.0;
  CHECK(best_threshold(rows, rising, 0) == -62);
  std::vector<double> peak(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) peak[i] = -std::abs(rows[i].tau + 70);
  CHECK(best_threshold(rows, peak, 0) == -70);
  // plateau: the smaller tau of the tie wins
  for (std::size_t i = 0; i < rows.size(); ++i) peak[i] = rows[i].tau >= -75 && rows[i].tau <= -71 ? 1.0 : 0.0;
  CHECK(best_threshold(rows, peak, 0) == -75);
  CHECK_THROWS_AS(best_threshold(rows, std::vector<double>(3), 0), ShapeError);
  CHECK_THROWS_AS(best_threshold(rows, equal, 5), ConfigError);
}

TEST_CASE("oracle labels as predictions give the exhaustive argmax") {
  const auto prep = prepare(12, 2, 330);
  LabelModel oracle(ModelConfig::defaults(Arch::kFederationS));
  for (std::size_t k = 0; k < prep.raw.size(); ++k) {
    std::vector<double> labels;
    for (const auto& r : prep.raw[k].data.rows) labels.push_back(r.throughput);
    for (int v = 0; v < 2; ++v) {
      CHECK(predict_best_threshold(oracle, prep.norm[k], prep.meta, v) ==
            brute_force_best(prep.raw[k].data, labels, v));
    }
  }
}

TEST_CASE("best threshold is invariant under positive affine maps") {
  const auto prep = prepare(6, 1, 340);
  Rng rng(9);
  for (const auto& c : prep.raw) {
    const auto& rows = c.data.rows;
    std::vector<double> pred = testing::random_vector(rng, rows.size(), 0.0, 100.0);
    const int base = best_threshold(rows, pred, 0);
    for (double scale : {0.5, 3.0, 1000.0}) {
      std::vector<double> t(pred.size());
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * pred[i] + 12.5;
      CHECK(best_threshold(rows, t, 0) == base);
    }
  }
}

TEST_CASE("model gradients match finite differences") {
  const auto prep = prepare(1, 1, 350);
  Rng rng(12);
  {
    auto cfg = ModelConfig::defaults(Arch::kFederationS);
    cfg.dropout_p = 0.0;
    auto m = make_model(cfg);
    const auto s = m->make_samples(prep.norm[0]);
    CHECK(grad_rel_error(*m, s, rng, 60) < 1e-4);
  }
  {
    auto cfg = ModelConfig::defaults(Arch::kWirelessAi);
    cfg.grid = {16, 16, 5.0};
    auto m = make_model(cfg);
    const std::vector<std::size_t> idx = {0, 5, 9};
    const auto s = m->make_samples(prep.norm[0]).subset(idx);
    CHECK(grad_rel_error(*m, s, rng, 60) < 1e-4);
  }
}

TEST_CASE("mini-batch training lowers the loss deterministically") {
  const auto prep = prepare(3, 2, 360);
  std::vector<SampleSet> parts;
  auto cfg = ModelConfig::defaults(Arch::kFedIpc);
  cfg.hidden_sizes = {32};
  auto m = make_model(cfg);
  for (const auto& c : prep.norm) parts.push_back(m->make_samples(c));
  const auto all = SampleSet::concat(parts);
  const double before = mae_mbps(*m, all, prep.meta);
  nn::OptimizerState st(nn::OptimizerConfig{nn::OptimizerKind::kAdam, 1e-3, 0.0});
  train_minibatch(*m, all, st, 30, 16, 4);
  const double after = mae_mbps(*m, all, prep.meta);
  CHECK(after < before);

  auto m2 = make_model(cfg);
  nn::OptimizerState st2(nn::OptimizerConfig{nn::OptimizerKind::kAdam, 1e-3, 0.0});
  train_minibatch(*m2, all, st2, 30, 16, 4);
  CHECK(m2->parameters() == m->parameters());
  CHECK_THROWS_AS(train_minibatch(*m2, all, st2, 1, 0, 4), ConfigError);
}

TEST_CASE("centralized training runs on pooled samples") {
  const auto prep = prepare(3, 1, 370);
  auto cfg = ModelConfig::defaults(Arch::kCentralizedBaseline);
  cfg.hidden_sizes = {32, 16};
  auto m = make_model(cfg);
  std::vector<SampleSet> parts = {m->make_samples(prep.norm[0]), m->make_samples(prep.norm[1])};
  const auto train = SampleSet::concat(parts);
  const auto val = m->make_samples(prep.norm[2]);
  const auto hist = train_centralized(*m, train, val, prep.meta,
                                      {nn::OptimizerKind::kAdam, 1e-3, 0.0}, 4, 8, 1);
  REQUIRE(hist.size() == 4);
  CHECK(hist.front().epoch == 1);
  CHECK(hist.back().train_mae_mbps < hist.front().train_mae_mbps * 1.5);
  for (const auto& h : hist) CHECK(std::isfinite(h.val_mae_mbps));
}

}  // TEST_SUITE
