#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace srfl::nn {

enum class OptimizerKind { kSgd, kAdam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgd;
  double learning_rate = 0.01;
  double l2 = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  OptimizerConfig config;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t steps = 0;

  explicit OptimizerState(OptimizerConfig cfg = {}) : config(cfg) {}
  void reset() {
    first_moment.clear();
    second_moment.clear();
    steps = 0;
  }
};

// w <- w - lr * (grad + l2 * w)
void sgd_step(std::span<double> params, std::span<const double> grad, OptimizerState& state);
// Bias-corrected Adam; L2 term is added to the gradient before the moments.
void adam_step(std::span<double> params, std::span<const double> grad, OptimizerState& state);
// Dispatches on state.config.kind.
void step(std::span<double> params, std::span<const double> grad, OptimizerState& state);

}  // namespace srfl::nn
