#pragma once

#include "srfl/tensor.hpp"

namespace srfl::nn {

struct LossResult {
  double value = 0.0;
  Tensor grad;  // d(loss)/d(pred)
};

// Mean squared error over entries with mask = 1. An empty mask tensor means
// every entry counts. With no unmasked entries the loss and gradient are 0.
LossResult mse_loss(const Tensor& pred, const Tensor& target, const Tensor& mask = {});

// Mean absolute error over unmasked entries (0 when nothing is unmasked).
double mae_metric(const Tensor& pred, const Tensor& target, const Tensor& mask = {});

}  // namespace srfl::nn
