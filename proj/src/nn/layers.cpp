#include "sqa/nn/layers.hpp"

#include <cmath>

#include "sqa/common/error.hpp"

namespace sqa::nn {
namespace {

void fan_in_uniform(Tensor& t, double fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / fan_in);
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : t.values()) v = static_cast<float>(dist(rng));
}

void expect_rank4(const Tensor& x, int channels, const char* who) {
  if (x.rank() != 4 || x.dim(1) != channels)
    throw Error(errc::kShape, std::string(who) + ": expected (N, " + std::to_string(channels) + ", H, W), got " +
                                  x.shape_string());
}

}  // namespace

// -- Conv2d -----------------------------------------------------------------

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride)
    : weight({out_channels, in_channels, kernel, kernel}),
      bias({out_channels}),
      grad_weight({out_channels, in_channels, kernel, kernel}),
      grad_bias({out_channels}),
      in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride) {}

void Conv2d::init(Rng& rng) {
  fan_in_uniform(weight, double(in_channels_) * kernel_ * kernel_, rng);
  bias.fill(0.0f);
}

void Conv2d::collect(std::vector<ParamRef>& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", &weight, &grad_weight});
  out.push_back({prefix + ".bias", &bias, &grad_bias});
}

Tensor Conv2d::forward(const Tensor& x) {
  expect_rank4(x, in_channels_, "conv2d");
  geom_ = ConvGeometry::same(x.dim(0), in_channels_, x.dim(2), x.dim(3), out_channels_, kernel_, stride_);
  input_ = x;
  Tensor y({geom_.batch, out_channels_, geom_.out_h, geom_.out_w});
  kernels::conv2d_forward(geom_, x.values(), weight.values(), y.values());
  const std::size_t plane = static_cast<std::size_t>(geom_.out_h) * geom_.out_w;
#pragma omp parallel for schedule(static)
  for (int nc = 0; nc < geom_.batch * out_channels_; ++nc) {
    const float b = bias[static_cast<std::size_t>(nc % out_channels_)];
    float* p = y.data() + static_cast<std::size_t>(nc) * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] += b;
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
  if (dy.size() != geom_.output_size()) throw Error(errc::kShape, "conv2d backward: gradient shape mismatch");
  Tensor gw(weight.shape());
  kernels::conv2d_backward_weights(geom_, input_.values(), dy.values(), gw.values());
  for (std::size_t i = 0; i < gw.size(); ++i) grad_weight[i] += gw[i];
  const std::size_t plane = static_cast<std::size_t>(geom_.out_h) * geom_.out_w;
  for (int o = 0; o < out_channels_; ++o) {
    double acc = 0.0;
    for (int n = 0; n < geom_.batch; ++n) {
      const float* p = dy.data() + (static_cast<std::size_t>(n) * out_channels_ + o) * plane;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
    }
    grad_bias[static_cast<std::size_t>(o)] += static_cast<float>(acc);
  }
  Tensor dx(input_.shape());
  kernels::conv2d_backward_data(geom_, dy.values(), weight.values(), dx.values());
  return dx;
}

// -- ConvTranspose2d ----------------------------------------------------------

ConvTranspose2d::ConvTranspose2d(int in_channels, int out_channels, int kernel, int stride, int out_h, int out_w)
    : weight({in_channels, out_channels, kernel, kernel}),
      bias({out_channels}),
      grad_weight({in_channels, out_channels, kernel, kernel}),
      grad_bias({out_channels}),
      in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      out_h_(out_h),
      out_w_(out_w) {}

void ConvTranspose2d::init(Rng& rng) {
  fan_in_uniform(weight, double(in_channels_) * kernel_ * kernel_ / (double(stride_) * stride_), rng);
  bias.fill(0.0f);
}

void ConvTranspose2d::collect(std::vector<ParamRef>& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", &weight, &grad_weight});
  out.push_back({prefix + ".bias", &bias, &grad_bias});
}

Tensor ConvTranspose2d::forward(const Tensor& x) {
  expect_rank4(x, in_channels_, "conv_transpose2d");
  // The adjoint conv maps (out_channels, out_h, out_w) -> (in_channels, h, w).
  geom_ = ConvGeometry::same(x.dim(0), out_channels_, out_h_, out_w_, in_channels_, kernel_, stride_);
  if (geom_.out_h != x.dim(2) || geom_.out_w != x.dim(3))
    throw Error(errc::kShape, "conv_transpose2d: input " + x.shape_string() + " does not mirror target " +
                                  std::to_string(out_h_) + "x" + std::to_string(out_w_));
  input_ = x;
  Tensor y({geom_.batch, out_channels_, out_h_, out_w_});
  kernels::conv2d_backward_data(geom_, x.values(), weight.values(), y.values());
  const std::size_t plane = static_cast<std::size_t>(out_h_) * out_w_;
#pragma omp parallel for schedule(static)
  for (int nc = 0; nc < geom_.batch * out_channels_; ++nc) {
    const float b = bias[static_cast<std::size_t>(nc % out_channels_)];
    float* p = y.data() + static_cast<std::size_t>(nc) * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] += b;
  }
  return y;
}

Tensor ConvTranspose2d::backward(const Tensor& dy) {
  if (dy.size() != geom_.input_size()) throw Error(errc::kShape, "conv_transpose2d backward: gradient shape mismatch");
  Tensor gw(weight.shape());
  kernels::conv2d_backward_weights(geom_, dy.values(), input_.values(), gw.values());
  for (std::size_t i = 0; i < gw.size(); ++i) grad_weight[i] += gw[i];
  const std::size_t plane = static_cast<std::size_t>(out_h_) * out_w_;
  for (int o = 0; o < out_channels_; ++o) {
    double acc = 0.0;
    for (int n = 0; n < geom_.batch; ++n) {
      const float* p = dy.data() + (static_cast<std::size_t>(n) * out_channels_ + o) * plane;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
    }
    grad_bias[static_cast<std::size_t>(o)] += static_cast<float>(acc);
  }
  Tensor dx(input_.shape());
  kernels::conv2d_forward(geom_, dy.values(), weight.values(), dx.values());
  return dx;
}

// -- BatchNorm2d ----------------------------------------------------------------

BatchNorm2d::BatchNorm2d(int channels, float momentum, float eps)
    : gamma({channels}, 1.0f),
      beta({channels}),
      grad_gamma({channels}),
      grad_beta({channels}),
      running_mean({channels}),
      running_var({channels}, 1.0f),
      channels_(channels),
      momentum_(momentum),
      eps_(eps) {}

void BatchNorm2d::collect(std::vector<ParamRef>& out, const std::string& prefix) {
  out.push_back({prefix + ".gamma", &gamma, &grad_gamma});
  out.push_back({prefix + ".beta", &beta, &grad_beta});
  out.push_back({prefix + ".running_mean", &running_mean, nullptr});
  out.push_back({prefix + ".running_var", &running_var, nullptr});
}

Tensor BatchNorm2d::forward(const Tensor& x, Mode mode) {
  expect_rank4(x, channels_, "batch_norm");
  last_mode_ = mode;
  const int n = x.dim(0);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  const double count = static_cast<double>(n) * plane;
  Tensor y(x.shape());
  xhat_ = Tensor(x.shape());
  inv_std_.assign(static_cast<std::size_t>(channels_), 0.0f);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels_; ++c) {
    double mean, var;
    if (mode == Mode::kTrain) {
      double s = 0.0;
      for (int b = 0; b < n; ++b) {
        const float* p = x.data() + (static_cast<std::size_t>(b) * channels_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      mean = s / count;
      double ss = 0.0;
      for (int b = 0; b < n; ++b) {
        const float* p = x.data() + (static_cast<std::size_t>(b) * channels_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) ss += (p[i] - mean) * (p[i] - mean);
      }
      var = ss / count;
      const double unbiased = count > 1 ? ss / (count - 1) : var;
      running_mean[c] = static_cast<float>((1.0 - momentum_) * running_mean[c] + momentum_ * mean);
      running_var[c] = static_cast<float>((1.0 - momentum_) * running_var[c] + momentum_ * unbiased);
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    const double inv = 1.0 / std::sqrt(var + eps_);
    inv_std_[static_cast<std::size_t>(c)] = static_cast<float>(inv);
    for (int b = 0; b < n; ++b) {
      const std::size_t off = (static_cast<std::size_t>(b) * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const float h = static_cast<float>((x[off + i] - mean) * inv);
        xhat_[off + i] = h;
        y[off + i] = gamma[c] * h + beta[c];
      }
    }
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy) {
  if (dy.shape() != xhat_.shape()) throw Error(errc::kShape, "batch_norm backward: gradient shape mismatch");
  const int n = dy.dim(0);
  const std::size_t plane = static_cast<std::size_t>(dy.dim(2)) * dy.dim(3);
  const double count = static_cast<double>(n) * plane;
  Tensor dx(dy.shape());
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels_; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int b = 0; b < n; ++b) {
      const std::size_t off = (static_cast<std::size_t>(b) * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += dy[off + i];
        sum_dy_xhat += static_cast<double>(dy[off + i]) * xhat_[off + i];
      }
    }
    grad_gamma[c] += static_cast<float>(sum_dy_xhat);
    grad_beta[c] += static_cast<float>(sum_dy);
    const double g = gamma[c];
    const double inv = inv_std_[static_cast<std::size_t>(c)];
    for (int b = 0; b < n; ++b) {
      const std::size_t off = (static_cast<std::size_t>(b) * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        if (last_mode_ == Mode::kTrain)
          dx[off + i] = static_cast<float>(g * inv / count * (count * dy[off + i] - sum_dy - xhat_[off + i] * sum_dy_xhat));
        else
          dx[off + i] = static_cast<float>(g * inv * dy[off + i]);
      }
    }
  }
  return dx;
}

// -- Dense ------------------------------------------------------------------------

Dense::Dense(int in, int out)
    : weight({out, in}), bias({out}), grad_weight({out, in}), grad_bias({out}), in_(in), out_(out) {}

void Dense::init(Rng& rng) {
  fan_in_uniform(weight, in_, rng);
  bias.fill(0.0f);
}

void Dense::collect(std::vector<ParamRef>& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", &weight, &grad_weight});
  out.push_back({prefix + ".bias", &bias, &grad_bias});
}

Tensor Dense::forward(const Tensor& x) {
  if (x.rank() < 1 || x.stride0() != static_cast<std::size_t>(in_))
    throw Error(errc::kShape, "dense: expected " + std::to_string(in_) + " features per row, got " + x.shape_string());
  input_shape_ = x.shape();
  input_ = x;
  const int n = x.dim(0);
  Tensor y({n, out_});
  kernels::dense_forward(n, in_, out_, x.values(), weight.values(), y.values());
  for (int b = 0; b < n; ++b)
    for (int o = 0; o < out_; ++o) y[static_cast<std::size_t>(b) * out_ + o] += bias[static_cast<std::size_t>(o)];
  return y;
}

Tensor Dense::backward(const Tensor& dy) {
  const int n = input_.dim(0);
  if (dy.size() != static_cast<std::size_t>(n) * out_) throw Error(errc::kShape, "dense backward: gradient shape mismatch");
  Tensor gw({out_, in_});
  kernels::dense_backward_weights(n, in_, out_, input_.values(), dy.values(), gw.values());
  for (std::size_t i = 0; i < gw.size(); ++i) grad_weight[i] += gw[i];
  for (int o = 0; o < out_; ++o) {
    double acc = 0.0;
    for (int b = 0; b < n; ++b) acc += dy[static_cast<std::size_t>(b) * out_ + o];
    grad_bias[static_cast<std::size_t>(o)] += static_cast<float>(acc);
  }
  Tensor dx(input_shape_);
  kernels::dense_backward_data(n, in_, out_, dy.values(), weight.values(), dx.values());
  return dx;
}

// -- Relu / Dropout -------------------------------------------------------------------

Tensor Relu::forward(const Tensor& x) {
  Tensor y(x.shape());
  mask_.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask_[i] = x[i] > 0.0f;
    y[i] = mask_[i] ? x[i] : 0.0f;
  }
  return y;
}

Tensor Relu::backward(const Tensor& dy) const {
  if (dy.size() != mask_.size()) throw Error(errc::kShape, "relu backward: gradient shape mismatch");
  Tensor dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = mask_[i] ? dy[i] : 0.0f;
  return dx;
}

Tensor Dropout::forward(const Tensor& x, Mode mode, std::uint64_t seed) {
  scale_.assign(x.size(), 1.0f);
  if (mode == Mode::kEval || rate_ <= 0.0f) return x;
  Rng rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  const float keep_scale = 1.0f / (1.0f - rate_);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    scale_[i] = u(rng) < rate_ ? 0.0f : keep_scale;
    y[i] = x[i] * scale_[i];
  }
  return y;
}

Tensor Dropout::backward(const Tensor& dy) const {
  Tensor dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * scale_[i];
  return dx;
}

}  // namespace sqa::nn
