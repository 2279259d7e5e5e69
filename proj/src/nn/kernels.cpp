#include <algorithm>
#include <cstring>
#include <vector>

#include "sqa/common/error.hpp"
#include "sqa/nn/kernels.hpp"

namespace sqa::nn {

int same_output(int in, int stride) { return (in + stride - 1) / stride; }

ConvGeometry ConvGeometry::same(int batch, int in_channels, int in_h, int in_w, int out_channels, int kernel,
                                int stride) {
  ConvGeometry g;
  g.batch = batch;
  g.in_channels = in_channels;
  g.in_h = in_h;
  g.in_w = in_w;
  g.out_channels = out_channels;
  g.kernel = kernel;
  g.stride = stride;
  g.out_h = same_output(in_h, stride);
  g.out_w = same_output(in_w, stride);
  const int pad_h = std::max((g.out_h - 1) * stride + kernel - in_h, 0);
  const int pad_w = std::max((g.out_w - 1) * stride + kernel - in_w, 0);
  g.pad_top = pad_h / 2;
  g.pad_left = pad_w / 2;
  return g;
}

namespace kernels {
namespace {

constexpr int kRowBlock = 4;
constexpr int kColBlock = 256;

void check(const ConvGeometry& g, std::size_t x, std::size_t w, std::size_t y) {
  if (x != g.input_size() || w != g.weight_size() || y != g.output_size())
    throw Error(errc::kShape, "convolution buffers do not match the geometry");
}

// col[(c*k + ky)*k + kx][oy*out_w + ox]
void im2col(const ConvGeometry& g, const float* x, float* col) {
  const int k = g.kernel;
  const int rows = g.in_channels * k * k;
  const int p = g.out_h * g.out_w;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int c = r / (k * k);
    const int ky = (r / k) % k;
    const int kx = r % k;
    float* dst = col + static_cast<std::size_t>(r) * p;
    const float* src = x + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int oy = 0; oy < g.out_h; ++oy) {
      const int iy = oy * g.stride - g.pad_top + ky;
      float* row = dst + static_cast<std::size_t>(oy) * g.out_w;
      if (iy < 0 || iy >= g.in_h) {
        std::fill(row, row + g.out_w, 0.0f);
        continue;
      }
      const float* srow = src + static_cast<std::size_t>(iy) * g.in_w;
      for (int ox = 0; ox < g.out_w; ++ox) {
        const int ix = ox * g.stride - g.pad_left + kx;
        row[ox] = (ix >= 0 && ix < g.in_w) ? srow[ix] : 0.0f;
      }
    }
  }
}

// Adjoint of im2col; overwrites x.
void col2im(const ConvGeometry& g, const float* col, float* x) {
  const int k = g.kernel;
  const int p = g.out_h * g.out_w;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < g.in_channels; ++c) {
    float* img = x + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    std::fill(img, img + static_cast<std::size_t>(g.in_h) * g.in_w, 0.0f);
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const float* src = col + static_cast<std::size_t>((c * k + ky) * k + kx) * p;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad_top + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          float* irow = img + static_cast<std::size_t>(iy) * g.in_w;
          const float* srow = src + static_cast<std::size_t>(oy) * g.out_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad_left + kx;
            if (ix >= 0 && ix < g.in_w) irow[ix] += srow[ox];
          }
        }
      }
  }
}

}  // namespace

void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + static_cast<std::size_t>(m) * n, 0.0f);
  for (int j0 = 0; j0 < n; j0 += kColBlock) {
    const int len = std::min(kColBlock, n - j0);
#pragma omp parallel for schedule(static)
    for (int i0 = 0; i0 < m; i0 += kRowBlock) {
      const int rows = std::min(kRowBlock, m - i0);
      if (rows == kRowBlock) {
        float* __restrict c0 = c + static_cast<std::size_t>(i0) * n + j0;
        float* __restrict c1 = c0 + n;
        float* __restrict c2 = c1 + n;
        float* __restrict c3 = c2 + n;
        for (int kk = 0; kk < k; ++kk) {
          const float* __restrict brow = b + static_cast<std::size_t>(kk) * n + j0;
          const float a0 = a[static_cast<std::size_t>(i0) * k + kk];
          const float a1 = a[static_cast<std::size_t>(i0 + 1) * k + kk];
          const float a2 = a[static_cast<std::size_t>(i0 + 2) * k + kk];
          const float a3 = a[static_cast<std::size_t>(i0 + 3) * k + kk];
#pragma omp simd
          for (int j = 0; j < len; ++j) {
            const float bj = brow[j];
            c0[j] += a0 * bj;
            c1[j] += a1 * bj;
            c2[j] += a2 * bj;
            c3[j] += a3 * bj;
          }
        }
      } else {
        for (int r = 0; r < rows; ++r) {
          float* __restrict crow = c + static_cast<std::size_t>(i0 + r) * n + j0;
          for (int kk = 0; kk < k; ++kk) {
            const float av = a[static_cast<std::size_t>(i0 + r) * k + kk];
            const float* __restrict brow = b + static_cast<std::size_t>(kk) * n + j0;
#pragma omp simd
            for (int j = 0; j < len; ++j) crow[j] += av * brow[j];
          }
        }
      }
    }
  }
}

void gemm_tn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + static_cast<std::size_t>(m) * n, 0.0f);
  for (int j0 = 0; j0 < n; j0 += kColBlock) {
    const int len = std::min(kColBlock, n - j0);
#pragma omp parallel for schedule(static)
    for (int i0 = 0; i0 < m; i0 += kRowBlock) {
      const int rows = std::min(kRowBlock, m - i0);
      if (rows == kRowBlock) {
        float* __restrict c0 = c + static_cast<std::size_t>(i0) * n + j0;
        float* __restrict c1 = c0 + n;
        float* __restrict c2 = c1 + n;
        float* __restrict c3 = c2 + n;
        for (int kk = 0; kk < k; ++kk) {
          const float* __restrict brow = b + static_cast<std::size_t>(kk) * n + j0;
          const float* arow = a + static_cast<std::size_t>(kk) * m + i0;
          const float a0 = arow[0], a1 = arow[1], a2 = arow[2], a3 = arow[3];
#pragma omp simd
          for (int j = 0; j < len; ++j) {
            const float bj = brow[j];
            c0[j] += a0 * bj;
            c1[j] += a1 * bj;
            c2[j] += a2 * bj;
            c3[j] += a3 * bj;
          }
        }
      } else {
        for (int r = 0; r < rows; ++r) {
          float* __restrict crow = c + static_cast<std::size_t>(i0 + r) * n + j0;
          for (int kk = 0; kk < k; ++kk) {
            const float av = a[static_cast<std::size_t>(kk) * m + i0 + r];
            const float* __restrict brow = b + static_cast<std::size_t>(kk) * n + j0;
#pragma omp simd
            for (int j = 0; j < len; ++j) crow[j] += av * brow[j];
          }
        }
      }
    }
  }
}

void gemm_nt(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const float* __restrict arow = a + static_cast<std::size_t>(i) * k;
    float* crow = c + static_cast<std::size_t>(i) * n;
    int j = 0;
    for (; j + 4 <= n; j += 4) {
      const float* __restrict b0 = b + static_cast<std::size_t>(j) * k;
      const float* __restrict b1 = b0 + k;
      const float* __restrict b2 = b1 + k;
      const float* __restrict b3 = b2 + k;
      float s0 = 0.0f, s1 = 0.0f, s2 = 0.0f, s3 = 0.0f;
#pragma omp simd reduction(+ : s0, s1, s2, s3)
      for (int kk = 0; kk < k; ++kk) {
        const float av = arow[kk];
        s0 += av * b0[kk];
        s1 += av * b1[kk];
        s2 += av * b2[kk];
        s3 += av * b3[kk];
      }
      if (accumulate) {
        crow[j] += s0;
        crow[j + 1] += s1;
        crow[j + 2] += s2;
        crow[j + 3] += s3;
      } else {
        crow[j] = s0;
        crow[j + 1] = s1;
        crow[j + 2] = s2;
        crow[j + 3] = s3;
      }
    }
    for (; j < n; ++j) {
      const float* __restrict brow = b + static_cast<std::size_t>(j) * k;
      float s = 0.0f;
#pragma omp simd reduction(+ : s)
      for (int kk = 0; kk < k; ++kk) s += arow[kk] * brow[kk];
      crow[j] = accumulate ? crow[j] + s : s;
    }
  }
}

void conv2d_forward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w, std::span<float> y) {
  check(g, x.size(), w.size(), y.size());
  const int kdim = g.in_channels * g.kernel * g.kernel;
  const int p = g.out_h * g.out_w;
  std::vector<float> col(static_cast<std::size_t>(kdim) * p);
  for (int n = 0; n < g.batch; ++n) {
    im2col(g, x.data() + static_cast<std::size_t>(n) * g.in_channels * g.in_h * g.in_w, col.data());
    gemm_nn(g.out_channels, p, kdim, w.data(), col.data(), y.data() + static_cast<std::size_t>(n) * g.out_channels * p,
            false);
  }
}

void conv2d_backward_data(const ConvGeometry& g, std::span<const float> dy, std::span<const float> w,
                          std::span<float> dx) {
  check(g, dx.size(), w.size(), dy.size());
  const int kdim = g.in_channels * g.kernel * g.kernel;
  const int p = g.out_h * g.out_w;
  std::vector<float> col(static_cast<std::size_t>(kdim) * p);
  for (int n = 0; n < g.batch; ++n) {
    gemm_tn(kdim, p, g.out_channels, w.data(), dy.data() + static_cast<std::size_t>(n) * g.out_channels * p,
            col.data(), false);
    col2im(g, col.data(), dx.data() + static_cast<std::size_t>(n) * g.in_channels * g.in_h * g.in_w);
  }
}

void conv2d_backward_weights(const ConvGeometry& g, std::span<const float> x, std::span<const float> dy,
                             std::span<float> dw) {
  check(g, x.size(), dw.size(), dy.size());
  const int kdim = g.in_channels * g.kernel * g.kernel;
  const int p = g.out_h * g.out_w;
  std::vector<float> col(static_cast<std::size_t>(kdim) * p);
  std::fill(dw.begin(), dw.end(), 0.0f);
  for (int n = 0; n < g.batch; ++n) {
    im2col(g, x.data() + static_cast<std::size_t>(n) * g.in_channels * g.in_h * g.in_w, col.data());
    gemm_nt(g.out_channels, kdim, p, dy.data() + static_cast<std::size_t>(n) * g.out_channels * p, col.data(),
            dw.data(), true);
  }
}

void dense_forward(int batch, int in, int out, std::span<const float> x, std::span<const float> w,
                   std::span<float> y) {
  gemm_nt(batch, out, in, x.data(), w.data(), y.data(), false);
}

void dense_backward_data(int batch, int in, int out, std::span<const float> dy, std::span<const float> w,
                         std::span<float> dx) {
  gemm_nn(batch, in, out, dy.data(), w.data(), dx.data(), false);
}

void dense_backward_weights(int batch, int in, int out, std::span<const float> x, std::span<const float> dy,
                            std::span<float> dw) {
  gemm_tn(out, in, batch, dy.data(), x.data(), dw.data(), false);
}

}  // namespace kernels
}  // namespace sqa::nn
