#include "srfl/loss.hpp"

#include <cmath>

#include "srfl/errors.hpp"

namespace srfl::nn {
namespace {

void check_shapes(const Tensor& pred, const Tensor& target, const Tensor& mask) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("prediction " + shape_string(pred.shape()) + " and target " +
                     shape_string(target.shape()) + " differ");
  }
  if (!mask.empty() && mask.shape() != pred.shape()) {
    throw ShapeError("mask " + shape_string(mask.shape()) + " does not match prediction " +
                     shape_string(pred.shape()));
  }
}

}  // namespace

LossResult mse_loss(const Tensor& pred, const Tensor& target, const Tensor& mask) {
  check_shapes(pred, target, mask);
  LossResult r{0.0, Tensor(pred.shape(), 0.0)};
  double count = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) count += mask.empty() ? 1.0 : mask[i];
  if (count == 0.0) return r;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double m = mask.empty() ? 1.0 : mask[i];
    if (m == 0.0) continue;
    const double diff = pred[i] - target[i];
    r.value += m * diff * diff;
    r.grad[i] = 2.0 * m * diff / count;
  }
  r.value /= count;
  return r;
}

double mae_metric(const Tensor& pred, const Tensor& target, const Tensor& mask) {
  check_shapes(pred, target, mask);
  double sum = 0.0;
  double count = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double m = mask.empty() ? 1.0 : mask[i];
    if (m == 0.0) continue;
    sum += m * std::abs(pred[i] - target[i]);
    count += m;
  }
  return count == 0.0 ? 0.0 : sum / count;
}

}  // namespace srfl::nn
