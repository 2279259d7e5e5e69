#include "sqa/dcec/assignments.hpp"

#include <algorithm>
#include <cmath>

#include "sqa/common/error.hpp"

namespace sqa::dcec {
namespace {

double squared_distance(const Matrix& a, int i, const Matrix& b, int j) {
  double d = 0.0;
  for (int k = 0; k < a.cols; ++k) {
    const double diff = a(i, k) - b(j, k);
    d += diff * diff;
  }
  return d;
}

void require_finite(const Matrix& m, const char* what) {
  for (double v : m.data)
    if (!std::isfinite(v)) throw Error(errc::kNumeric, std::string(what) + " contains non-finite values");
}

}  // namespace

Matrix soft_assign(const Matrix& embeddings, const Matrix& centers, double alpha) {
  if (embeddings.cols != centers.cols)
    throw Error(errc::kShape, "embedding and center dimensions differ");
  if (centers.rows < 1) throw Error(errc::kShape, "need at least one cluster center");
  if (!(alpha > 0)) throw Error(errc::kInvalidArgument, "alpha must be positive");
  require_finite(embeddings, "embeddings");
  require_finite(centers, "cluster centers");
  Matrix q(embeddings.rows, centers.rows);
  const double power = -(alpha + 1.0) / 2.0;
  for (int i = 0; i < embeddings.rows; ++i) {
    double total = 0.0;
    for (int j = 0; j < centers.rows; ++j) {
      const double k = alpha == 1.0 ? 1.0 / (1.0 + squared_distance(embeddings, i, centers, j))
                                    : std::pow(1.0 + squared_distance(embeddings, i, centers, j) / alpha, power);
      q(i, j) = k;
      total += k;
    }
    for (int j = 0; j < centers.rows; ++j) q(i, j) /= total;
  }
  return q;
}

std::vector<double> cluster_frequencies(const Matrix& q) {
  std::vector<double> f(static_cast<std::size_t>(q.cols), 0.0);
  for (int i = 0; i < q.rows; ++i)
    for (int j = 0; j < q.cols; ++j) f[j] += q(i, j);
  return f;
}

Matrix target_distribution(const Matrix& q) {
  const auto f = cluster_frequencies(q);
  for (double fj : f)
    if (!(fj > 0.0)) throw Error(errc::kNumeric, "cluster frequency is zero; target distribution undefined");
  Matrix p(q.rows, q.cols);
  for (int i = 0; i < q.rows; ++i) {
    double total = 0.0;
    for (int j = 0; j < q.cols; ++j) {
      p(i, j) = q(i, j) * q(i, j) / f[j];
      total += p(i, j);
    }
    for (int j = 0; j < q.cols; ++j) p(i, j) /= total;
  }
  return p;
}

double kl_divergence(const Matrix& p, const Matrix& q) {
  if (p.rows != q.rows || p.cols != q.cols) throw Error(errc::kShape, "P and Q shapes differ");
  if (p.rows == 0) return 0.0;
  double total = 0.0;
  for (int i = 0; i < p.rows; ++i)
    for (int j = 0; j < p.cols; ++j)
      if (p(i, j) > 0.0) total += p(i, j) * std::log(p(i, j) / q(i, j));
  return total / p.rows;
}

ClusteringGradients clustering_gradients(const Matrix& embeddings, const Matrix& centers, const Matrix& p,
                                         double alpha) {
  const Matrix q = soft_assign(embeddings, centers, alpha);
  if (p.rows != q.rows || p.cols != q.cols) throw Error(errc::kShape, "target distribution shape mismatch");
  ClusteringGradients g{Matrix(embeddings.rows, embeddings.cols), Matrix(centers.rows, centers.cols)};
  const double scale = 1.0 / std::max(1, embeddings.rows);
  for (int i = 0; i < embeddings.rows; ++i)
    for (int j = 0; j < centers.rows; ++j) {
      const double d2 = squared_distance(embeddings, i, centers, j);
      const double coeff = scale * (alpha + 1.0) * (p(i, j) - q(i, j)) / (alpha + d2);
      for (int k = 0; k < embeddings.cols; ++k) {
        const double diff = embeddings(i, k) - centers(j, k);
        g.d_embeddings(i, k) += coeff * diff;
        g.d_centers(j, k) -= coeff * diff;
      }
    }
  return g;
}

std::vector<int> hard_labels(const Matrix& q) {
  std::vector<int> labels(static_cast<std::size_t>(q.rows), 0);
  for (int i = 0; i < q.rows; ++i) {
    int best = 0;
    for (int j = 1; j < q.cols; ++j)
      if (q(i, j) > q(i, best)) best = j;
    labels[static_cast<std::size_t>(i)] = best;
  }
  return labels;
}

double label_change_fraction(std::span<const int> before, std::span<const int> after) {
  if (before.size() != after.size()) throw Error(errc::kShape, "label vectors differ in length");
  if (before.empty()) return 0.0;
  std::size_t changed = 0;
  for (std::size_t i = 0; i < before.size(); ++i) changed += before[i] != after[i];
  return static_cast<double>(changed) / static_cast<double>(before.size());
}

double row_entropy(const Matrix& m, int row) {
  double h = 0.0;
  for (double v : m.row(row))
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

}  // namespace sqa::dcec
