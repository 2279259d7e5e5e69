#include "sqa/train/losses.hpp"

#include <algorithm>
#include <cmath>

#include "sqa/common/error.hpp"

namespace sqa::train {

LossGrad cross_entropy(const nn::Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || static_cast<std::size_t>(logits.dim(0)) != labels.size())
    throw Error(errc::kShape, "cross_entropy: logits " + logits.shape_string() + " vs " +
                                  std::to_string(labels.size()) + " labels");
  const int n = logits.dim(0), c = logits.dim(1);
  LossGrad r;
  r.grad = nn::Tensor({n, c});
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= c) throw Error(errc::kInvalidArgument, "cross_entropy: label out of range");
    const float* z = logits.data() + static_cast<std::size_t>(i) * c;
    double mx = z[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, static_cast<double>(z[j]));
    double total = 0.0;
    for (int j = 0; j < c; ++j) total += std::exp(z[j] - mx);
    const double log_total = std::log(total);
    r.loss -= (z[labels[i]] - mx) - log_total;
    for (int j = 0; j < c; ++j) {
      const double p = std::exp(z[j] - mx - log_total);
      r.grad[static_cast<std::size_t>(i) * c + j] = static_cast<float>((p - (j == labels[i] ? 1.0 : 0.0)) / n);
    }
  }
  r.loss /= n;
  return r;
}

LossGrad mean_squared_error(const nn::Tensor& pred, std::span<const double> target) {
  if (pred.size() != target.size() || target.empty())
    throw Error(errc::kShape, "mse: " + std::to_string(pred.size()) + " predictions vs " +
                                  std::to_string(target.size()) + " targets");
  const auto n = static_cast<double>(target.size());
  LossGrad r;
  r.grad = nn::Tensor(pred.shape());
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = pred[i] - target[i];
    r.loss += d * d;
    r.grad[i] = static_cast<float>(2.0 * d / n);
  }
  r.loss /= n;
  return r;
}

LossGrad reconstruction_error(const nn::Tensor& recon, const nn::Tensor& x) {
  if (recon.shape() != x.shape())
    throw Error(errc::kShape, "reconstruction " + recon.shape_string() + " vs input " + x.shape_string());
  const auto n = static_cast<double>(x.size());
  LossGrad r;
  r.grad = nn::Tensor(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(recon[i]) - x[i];
    r.loss += d * d;
    r.grad[i] = static_cast<float>(2.0 * d / n);
  }
  r.loss /= n;
  return r;
}

}  // namespace sqa::train
