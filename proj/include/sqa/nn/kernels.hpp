#pragma once

#include <cstddef>
#include <span>

namespace sqa::nn {

/// Shape bookkeeping for a batched 2-D convolution with TensorFlow-style
/// "same" padding: out = ceil(in / stride), extra padding goes bottom/right.
struct ConvGeometry {
  int batch = 1;
  int in_channels = 1;
  int in_h = 1;
  int in_w = 1;
  int out_channels = 1;
  int out_h = 1;
  int out_w = 1;
  int kernel = 1;
  int stride = 1;
  int pad_top = 0;
  int pad_left = 0;

  static ConvGeometry same(int batch, int in_channels, int in_h, int in_w, int out_channels, int kernel, int stride);

  std::size_t input_size() const { return std::size_t(batch) * in_channels * in_h * in_w; }
  std::size_t output_size() const { return std::size_t(batch) * out_channels * out_h * out_w; }
  std::size_t weight_size() const { return std::size_t(out_channels) * in_channels * kernel * kernel; }
};

int same_output(int in, int stride);

/// OpenMP kernels. Work is split over output rows only, so every output
/// element is reduced in a fixed order and results do not depend on the
/// thread count.
namespace kernels {

/// C[m,n] (+)= sum_k A[m,k] B[k,n]
void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate);
/// C[m,n] (+)= sum_k A[m,k] B[n,k]
void gemm_nt(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate);
/// C[m,n] (+)= sum_k A[k,m] B[k,n]
void gemm_tn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate);

/// y = conv(x, w) with w laid out (out, in, k, k). No bias.
void conv2d_forward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w, std::span<float> y);
/// dx = conv^T(dy); overwrites dx.
void conv2d_backward_data(const ConvGeometry& g, std::span<const float> dy, std::span<const float> w, std::span<float> dx);
/// dw = sum over batch of x (*) dy; overwrites dw.
void conv2d_backward_weights(const ConvGeometry& g, std::span<const float> x, std::span<const float> dy, std::span<float> dw);

/// y[n,o] = sum_i w[o,i] x[n,i]
void dense_forward(int batch, int in, int out, std::span<const float> x, std::span<const float> w, std::span<float> y);
void dense_backward_data(int batch, int in, int out, std::span<const float> dy, std::span<const float> w, std::span<float> dx);
void dense_backward_weights(int batch, int in, int out, std::span<const float> x, std::span<const float> dy, std::span<float> dw);

}  // namespace kernels

/// Direct-loop serial versions of the same contracts. Slow; kept as the
/// ground truth for kernel tests and as the benchmark baseline.
namespace reference {

void conv2d_forward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w, std::span<float> y);
void conv2d_backward_data(const ConvGeometry& g, std::span<const float> dy, std::span<const float> w, std::span<float> dx);
void conv2d_backward_weights(const ConvGeometry& g, std::span<const float> x, std::span<const float> dy, std::span<float> dw);

void dense_forward(int batch, int in, int out, std::span<const float> x, std::span<const float> w, std::span<float> y);
void dense_backward_data(int batch, int in, int out, std::span<const float> dy, std::span<const float> w, std::span<float> dx);
void dense_backward_weights(int batch, int in, int out, std::span<const float> x, std::span<const float> dy, std::span<float> dw);

}  // namespace reference

}  // namespace sqa::nn
