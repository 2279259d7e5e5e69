#pragma once

#include <span>

#include "sqa/nn/tensor.hpp"

namespace sqa::train {

/// A scalar loss and its gradient with respect to the tensor it was computed from.
struct LossGrad {
  double loss = 0.0;
  nn::Tensor grad;
};

/// Mean over rows of -log softmax(logits)[label]; grad is (softmax - onehot) / N.
LossGrad cross_entropy(const nn::Tensor& logits, std::span<const int> labels);

/// Mean over rows of (pred - target)^2 for (N, 1) predictions.
LossGrad mean_squared_error(const nn::Tensor& pred, std::span<const double> target);

/// Mean over every element of (recon - x)^2.
LossGrad reconstruction_error(const nn::Tensor& recon, const nn::Tensor& x);

/// Multi-task objective: ce + mse, unweighted.
struct TaskLoss {
  double total = 0.0;
  double ce = 0.0;
  double mse = 0.0;
};

}  // namespace sqa::train
