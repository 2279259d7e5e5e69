#include <algorithm>

#include "sqa/nn/kernels.hpp"

namespace sqa::nn::reference {
namespace {

std::size_t xi(const ConvGeometry& g, int n, int c, int y, int x) {
  return ((static_cast<std::size_t>(n) * g.in_channels + c) * g.in_h + y) * g.in_w + x;
}
std::size_t yi(const ConvGeometry& g, int n, int c, int y, int x) {
  return ((static_cast<std::size_t>(n) * g.out_channels + c) * g.out_h + y) * g.out_w + x;
}
std::size_t wi(const ConvGeometry& g, int o, int c, int ky, int kx) {
  return ((static_cast<std::size_t>(o) * g.in_channels + c) * g.kernel + ky) * g.kernel + kx;
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w, std::span<float> y) {
  for (int n = 0; n < g.batch; ++n)
    for (int o = 0; o < g.out_channels; ++o)
      for (int oy = 0; oy < g.out_h; ++oy)
        for (int ox = 0; ox < g.out_w; ++ox) {
          double acc = 0.0;
          for (int c = 0; c < g.in_channels; ++c)
            for (int ky = 0; ky < g.kernel; ++ky)
              for (int kx = 0; kx < g.kernel; ++kx) {
                const int iy = oy * g.stride - g.pad_top + ky;
                const int ix = ox * g.stride - g.pad_left + kx;
                if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) continue;
                acc += static_cast<double>(x[xi(g, n, c, iy, ix)]) * w[wi(g, o, c, ky, kx)];
              }
          y[yi(g, n, o, oy, ox)] = static_cast<float>(acc);
        }
}

void conv2d_backward_data(const ConvGeometry& g, std::span<const float> dy, std::span<const float> w,
                          std::span<float> dx) {
  std::vector<double> acc(dx.size(), 0.0);
  for (int n = 0; n < g.batch; ++n)
    for (int o = 0; o < g.out_channels; ++o)
      for (int oy = 0; oy < g.out_h; ++oy)
        for (int ox = 0; ox < g.out_w; ++ox) {
          const double d = dy[yi(g, n, o, oy, ox)];
          for (int c = 0; c < g.in_channels; ++c)
            for (int ky = 0; ky < g.kernel; ++ky)
              for (int kx = 0; kx < g.kernel; ++kx) {
                const int iy = oy * g.stride - g.pad_top + ky;
                const int ix = ox * g.stride - g.pad_left + kx;
                if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) continue;
                acc[xi(g, n, c, iy, ix)] += d * w[wi(g, o, c, ky, kx)];
              }
        }
  std::transform(acc.begin(), acc.end(), dx.begin(), [](double v) { return static_cast<float>(v); });
}

void conv2d_backward_weights(const ConvGeometry& g, std::span<const float> x, std::span<const float> dy,
                             std::span<float> dw) {
  std::vector<double> acc(dw.size(), 0.0);
  for (int n = 0; n < g.batch; ++n)
    for (int o = 0; o < g.out_channels; ++o)
      for (int oy = 0; oy < g.out_h; ++oy)
        for (int ox = 0; ox < g.out_w; ++ox) {
          const double d = dy[yi(g, n, o, oy, ox)];
          for (int c = 0; c < g.in_channels; ++c)
            for (int ky = 0; ky < g.kernel; ++ky)
              for (int kx = 0; kx < g.kernel; ++kx) {
                const int iy = oy * g.stride - g.pad_top + ky;
                const int ix = ox * g.stride - g.pad_left + kx;
                if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) continue;
                acc[wi(g, o, c, ky, kx)] += d * x[xi(g, n, c, iy, ix)];
              }
        }
  std::transform(acc.begin(), acc.end(), dw.begin(), [](double v) { return static_cast<float>(v); });
}

void dense_forward(int batch, int in, int out, std::span<const float> x, std::span<const float> w,
                   std::span<float> y) {
  for (int n = 0; n < batch; ++n)
    for (int o = 0; o < out; ++o) {
      double acc = 0.0;
      for (int i = 0; i < in; ++i)
        acc += static_cast<double>(w[static_cast<std::size_t>(o) * in + i]) * x[static_cast<std::size_t>(n) * in + i];
      y[static_cast<std::size_t>(n) * out + o] = static_cast<float>(acc);
    }
}

void dense_backward_data(int batch, int in, int out, std::span<const float> dy, std::span<const float> w,
                         std::span<float> dx) {
  for (int n = 0; n < batch; ++n)
    for (int i = 0; i < in; ++i) {
      double acc = 0.0;
      for (int o = 0; o < out; ++o)
        acc += static_cast<double>(dy[static_cast<std::size_t>(n) * out + o]) * w[static_cast<std::size_t>(o) * in + i];
      dx[static_cast<std::size_t>(n) * in + i] = static_cast<float>(acc);
    }
}

void dense_backward_weights(int batch, int in, int out, std::span<const float> x, std::span<const float> dy,
                            std::span<float> dw) {
  for (int o = 0; o < out; ++o)
    for (int i = 0; i < in; ++i) {
      double acc = 0.0;
      for (int n = 0; n < batch; ++n)
        acc += static_cast<double>(dy[static_cast<std::size_t>(n) * out + o]) * x[static_cast<std::size_t>(n) * in + i];
      dw[static_cast<std::size_t>(o) * in + i] = static_cast<float>(acc);
    }
}

}  // namespace sqa::nn::reference
