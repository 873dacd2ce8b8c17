#include "srfl/optim.hpp"

#include <cmath>
#include <string>

#include "srfl/errors.hpp"

namespace srfl::nn {

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "sgd";
}

OptimizerKind optimizer_from_string(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

namespace {

void check_step_inputs(std::span<const double> params, std::span<const double> grad) {
  if (params.size() != grad.size()) {
    throw ShapeError("gradient length " + std::to_string(grad.size()) +
                     " does not match parameter length " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NumericError("non-finite gradient " + std::to_string(grad[i]) + " at parameter " +
                         std::to_string(i) + " (param value " + std::to_string(params[i]) +
                         ")");
    }
  }
}

}  // namespace

void sgd_step(std::span<double> params, std::span<const double> grad, OptimizerState& state) {
  check_step_inputs(params, grad);
  const double lr = state.config.learning_rate;
  const double l2 = state.config.l2;
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * (grad[i] + l2 * params[i]);
  ++state.steps;
}

void adam_step(std::span<double> params, std::span<const double> grad, OptimizerState& state) {
  check_step_inputs(params, grad);
  const auto& c = state.config;
  if (state.first_moment.size() != params.size()) {
    if (state.steps != 0) throw ShapeError("Adam moment buffers do not match parameters");
    state.first_moment.assign(params.size(), 0.0);
    state.second_moment.assign(params.size(), 0.0);
  }
  ++state.steps;
  const double t = static_cast<double>(state.steps);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i] + c.l2 * params[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double m_hat = m / bias1;
    const double v_hat = v / bias2;
    params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

void step(std::span<double> params, std::span<const double> grad, OptimizerState& state) {
  if (state.config.kind == OptimizerKind::kAdam) {
    adam_step(params, grad, state);
  } else {
    sgd_step(params, grad, state);
  }
}

}  // namespace srfl::nn
