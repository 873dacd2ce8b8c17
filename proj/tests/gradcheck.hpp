#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "srfl/graph.hpp"
#include "srfl/random.hpp"

// Central finite-difference checks shared by the unit and acceptance tests.
namespace testing::gradcheck {

using namespace srfl;
using namespace srfl::nn;

constexpr double kStep = 1e-5;
constexpr double kTol = 1e-4;

inline Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Random input that stays away from the ReLU kink.
inline Tensor kink_free(Rng& rng, Shape shape) {
  Tensor t(shape);
  for (auto& v : t.values()) {
    do {
      v = rng.uniform(-1.0, 1.0);
    } while (std::abs(v) < 1e-3);
  }
  return t;
}

inline double weighted_sum(const Tensor& out, const Tensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * w[i];
  return s;
}

inline double norm_rel_error(const std::vector<double>& a, const std::vector<double>& n) {
  double diff = 0.0, na = 0.0, nn_ = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn_ += n[i] * n[i];
  }
  const double denom = std::sqrt(na) + std::sqrt(nn_);
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

// Loss = sum(w * output). Returns the worst relative error across the
// parameter gradient and every input gradient.
inline double gradient_check(ModelGraph& g, std::vector<Tensor> inputs, Rng& rng) {
  Tensor out = g.forward(inputs);
  const Tensor w = random_tensor(rng, out.shape());
  const Gradients grads = g.backward(w);
  const auto loss_at = [&]() { return weighted_sum(g.forward(inputs), w); };

  double worst = 0.0;
  auto params = g.flatten();
  if (!params.empty()) {
    std::vector<double> numeric(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double keep = params[i];
      params[i] = keep + kStep;
      g.unflatten(params);
      const double up = loss_at();
      params[i] = keep - kStep;
      g.unflatten(params);
      const double down = loss_at();
      params[i] = keep;
      g.unflatten(params);
      numeric[i] = (up - down) / (2.0 * kStep);
    }
    worst = std::max(worst, norm_rel_error(grads.params, numeric));
  }
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::vector<double> numeric(inputs[k].size());
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double keep = inputs[k][i];
      inputs[k][i] = keep + kStep;
      const double up = loss_at();
      inputs[k][i] = keep - kStep;
      const double down = loss_at();
      inputs[k][i] = keep;
      numeric[i] = (up - down) / (2.0 * kStep);
    }
    worst = std::max(worst, norm_rel_error(grads.inputs[k].values(), numeric));
  }
  return worst;
}

inline Shape batched(std::size_t n, Shape s) {
  s.insert(s.begin(), n);
  return s;
}

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(lo),
                                                  static_cast<std::int64_t>(hi)));
}

// Max-pool input whose windows have a clear winner, so the subgradient is
// unique within the finite-difference step.
inline Tensor untied_pool_input(Rng& rng, Shape shape, std::size_t k, std::size_t stride) {
  const std::size_t c = shape[1], h = shape[2], w = shape[3];
  for (;;) {
    Tensor t = random_tensor(rng, shape);
    bool ok = true;
    for (std::size_t n = 0; n < shape[0] && ok; ++n) {
      for (std::size_t ch = 0; ch < c && ok; ++ch) {
        for (std::size_t oy = 0; oy + k <= h && ok; oy += stride) {
          for (std::size_t ox = 0; ox + k <= w && ok; ox += stride) {
            double best = -1e9, second = -1e9;
            for (std::size_t dy = 0; dy < k; ++dy) {
              for (std::size_t dx = 0; dx < k; ++dx) {
                const double v = t[((n * c + ch) * h + oy + dy) * w + ox + dx];
                if (v > best) {
                  second = best;
                  best = v;
                } else if (v > second) {
                  second = v;
                }
              }
            }
            if (best - second < 1e-3) ok = false;
          }
        }
      }
    }
    if (ok) return t;
  }
}

using KindCheck = std::pair<std::string, std::function<double(Rng&)>>;

// One random configuration per call; returns its worst relative error.
inline std::vector<KindCheck> layer_kind_checks() {
  return {
      {"dense", [](Rng& rng) {
      const std::size_t in = pick(rng, 1, 7), out = pick(rng, 1, 6), n = pick(rng, 1, 4);
      ModelGraph g;
      g.add(LayerSpec::dense(in, out), g.add_input({in}));
      g.initialize(rng.next_u64());
      auto p = g.flatten();
      for (auto& v : p) v += rng.uniform(-0.3, 0.3);  // non-zero biases too
      g.unflatten(p);
      return gradient_check(g, {random_tensor(rng, {n, in})}, rng);
    }},
      {"conv2d", [](Rng& rng) {
      const std::size_t ci = pick(rng, 1, 3), co = pick(rng, 1, 3), k = pick(rng, 1, 3);
      const std::size_t stride = pick(rng, 1, 2), pad = pick(rng, 0, 2);
      const std::size_t h = pick(rng, k, 6), w = pick(rng, k, 6), n = pick(rng, 1, 2);
      ModelGraph g;
      g.add(LayerSpec::conv2d(ci, co, k, stride, pad), g.add_input({ci, h, w}));
      g.initialize(rng.next_u64());
      auto p = g.flatten();
      for (auto& v : p) v += rng.uniform(-0.2, 0.2);
      g.unflatten(p);
      return gradient_check(g, {random_tensor(rng, {n, ci, h, w})}, rng);
    }},
      {"maxpool2d", [](Rng& rng) {
      const std::size_t k = pick(rng, 1, 3), stride = pick(rng, 1, 3);
      const std::size_t c = pick(rng, 1, 3), h = pick(rng, k, 7), w = pick(rng, k, 7);
      const std::size_t n = pick(rng, 1, 2);
      ModelGraph g;
      g.add(LayerSpec::max_pool2d(k, stride), g.add_input({c, h, w}));
      return gradient_check(g, {untied_pool_input(rng, {n, c, h, w}, k, stride)}, rng);
    }},
      {"avgpool", [](Rng& rng) {
      const std::size_t c = pick(rng, 1, 4), h = pick(rng, 1, 5), w = pick(rng, 1, 5);
      ModelGraph g;
      g.add(LayerSpec::adaptive_avg_pool(), g.add_input({c, h, w}));
      return gradient_check(g, {random_tensor(rng, {pick(rng, 1, 3), c, h, w})}, rng);
    }},
      {"concat", [](Rng& rng) {
      const std::size_t a = pick(rng, 1, 4), b = pick(rng, 1, 4), c = pick(rng, 1, 3);
      const std::size_t n = pick(rng, 1, 3);
      ModelGraph g;
      const auto ia = g.add_input({a});
      const auto ib = g.add_input({b});
      const auto ic = g.add_input({c});
      g.add(LayerSpec::concat(), {ia, ib, ic});
      return gradient_check(
          g, {random_tensor(rng, {n, a}), random_tensor(rng, {n, b}), random_tensor(rng, {n, c})},
          rng);
    }},
      {"slice", [](Rng& rng) {
      const std::size_t f = pick(rng, 2, 9);
      const std::size_t begin = pick(rng, 0, f - 1);
      const std::size_t end = pick(rng, begin + 1, f);
      ModelGraph g;
      g.add(LayerSpec::slice(begin, end), g.add_input({f}));
      return gradient_check(g, {random_tensor(rng, {pick(rng, 1, 3), f})}, rng);
    }},
      {"dropout", [](Rng& rng) {
      const std::size_t f = pick(rng, 2, 12);
      ModelGraph g;
      g.add(LayerSpec::dropout(rng.uniform(0.05, 0.6)), g.add_input({f}));
      g.set_mode(Mode::kTrain);
      g.set_dropout_seed(rng.next_u64());
      return gradient_check(g, {random_tensor(rng, {pick(rng, 1, 3), f})}, rng);
    }},
      {"relu", [](Rng& rng) {
      const std::size_t f = pick(rng, 1, 10);
      ModelGraph g;
      g.add(LayerSpec::relu(), g.add_input({f}));
      return gradient_check(g, {kink_free(rng, {pick(rng, 1, 3), f})}, rng);
    }},
      {"tanh", [](Rng& rng) {
      const std::size_t f = pick(rng, 1, 10);
      ModelGraph g;
      g.add(LayerSpec::tanh(), g.add_input({f}));
      return gradient_check(g, {random_tensor(rng, {pick(rng, 1, 3), f}, -2.0, 2.0)}, rng);
    }},
      {"composed", [](Rng& rng) {
      const std::size_t h = pick(rng, 4, 7), extra = pick(rng, 1, 3);
      ModelGraph g;
      const auto img = g.add_input({1, h, h});
      const auto side = g.add_input({extra});
      auto x = g.add(LayerSpec::conv2d(1, 2, 3, 1, 1), img);
      x = g.add(LayerSpec::tanh(), x);
      x = g.add(LayerSpec::adaptive_avg_pool(), x);
      x = g.add(LayerSpec::concat(), {x, side});
      x = g.add(LayerSpec::dense(2 + extra, 3, InitScheme::kXavierUniform), x);
      const auto a = g.add(LayerSpec::slice(0, 2), x);
      const auto b = g.add(LayerSpec::slice(1, 3), x);
      x = g.add(LayerSpec::concat(), {a, b});
      g.add(LayerSpec::tanh(), x);
      g.initialize(rng.next_u64());
      return gradient_check(g, {random_tensor(rng, {2, 1, h, h}), random_tensor(rng, {2, extra})},
                            rng);
    }},
  };
}

// Worst error over `configs` random configurations of one kind.
inline double worst_error(const KindCheck& check, int configs = 20) {
  Rng rng(mix_seed(0x9c4d, std::hash<std::string>{}(check.first) & 0xffff));
  double worst = 0.0;
  for (int c = 0; c < configs; ++c) worst = std::max(worst, check.second(rng));
  return worst;
}

}  // namespace testing::gradcheck
