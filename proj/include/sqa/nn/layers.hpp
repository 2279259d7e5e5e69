#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sqa/common/rng.hpp"
#include "sqa/nn/kernels.hpp"
#include "sqa/nn/tensor.hpp"

namespace sqa::nn {

enum class Mode { kTrain, kEval };

/// A named tensor owned by a layer. `grad` is null for non-trainable buffers
/// (batch-norm running statistics).
struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

/// Conv layer with "same" padding. Weights (out, in, k, k).
class Conv2d {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void init(Rng& rng);
  void collect(std::vector<ParamRef>& out, const std::string& prefix);

  Tensor weight, bias, grad_weight, grad_bias;

 private:
  int in_channels_, out_channels_, kernel_, stride_;
  Tensor input_;
  ConvGeometry geom_;
};

/// Transposed conv: the adjoint of a same-padded conv that maps an
/// (out_h, out_w) image onto the input grid, so output shapes mirror the
/// encoder exactly. Weights (in, out, k, k).
class ConvTranspose2d {
 public:
  ConvTranspose2d(int in_channels, int out_channels, int kernel, int stride, int out_h, int out_w);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void init(Rng& rng);
  void collect(std::vector<ParamRef>& out, const std::string& prefix);

  Tensor weight, bias, grad_weight, grad_bias;

 private:
  int in_channels_, out_channels_, kernel_, stride_, out_h_, out_w_;
  Tensor input_;
  ConvGeometry geom_;
};

class BatchNorm2d {
 public:
  explicit BatchNorm2d(int channels, float momentum = 0.1f, float eps = 1e-5f);

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& dy);
  void collect(std::vector<ParamRef>& out, const std::string& prefix);

  Tensor gamma, beta, grad_gamma, grad_beta, running_mean, running_var;

 private:
  int channels_;
  float momentum_, eps_;
  Mode last_mode_ = Mode::kEval;
  Tensor xhat_;
  std::vector<float> inv_std_;
};

class Dense {
 public:
  Dense(int in, int out);

  /// x: (N, in) or any shape whose trailing size is `in`.
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void init(Rng& rng);
  void collect(std::vector<ParamRef>& out, const std::string& prefix);

  int in() const { return in_; }
  int out() const { return out_; }

  Tensor weight, bias, grad_weight, grad_bias;

 private:
  int in_, out_;
  Tensor input_;
  std::vector<int> input_shape_;
};

class Relu {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy) const;

 private:
  std::vector<std::uint8_t> mask_;
};

/// Inverted dropout; identity in eval mode.
class Dropout {
 public:
  explicit Dropout(float rate) : rate_(rate) {}
  Tensor forward(const Tensor& x, Mode mode, std::uint64_t seed);
  Tensor backward(const Tensor& dy) const;

 private:
  float rate_;
  std::vector<float> scale_;
};

}  // namespace sqa::nn
