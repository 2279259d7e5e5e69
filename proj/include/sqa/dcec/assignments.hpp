#pragma once

#include <span>
#include <vector>

namespace sqa::dcec {

/// Small row-major double matrix for the clustering math.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }
  std::span<const double> row(int i) const { return {data.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)}; }
};

/// Student's t soft assignment:
///   q_ij = k_ij / sum_j' k_ij',  k_ij = (1 + |z_i - u_j|^2 / alpha)^(-(alpha+1)/2)
Matrix soft_assign(const Matrix& embeddings, const Matrix& centers, double alpha = 1.0);

/// f_j = sum_i q_ij
std::vector<double> cluster_frequencies(const Matrix& q);

/// p_ij = (q_ij^2 / f_j) / sum_j' (q_ij'^2 / f_j')
Matrix target_distribution(const Matrix& q);

/// KL(P || Q) summed over clusters and averaged over rows; 0 log 0 = 0.
double kl_divergence(const Matrix& p, const Matrix& q);

struct ClusteringGradients {
  Matrix d_embeddings;  // N x d
  Matrix d_centers;     // J x d
};

/// Analytic gradient of kl_divergence(P, soft_assign(Z, U)) with P held fixed.
///   dL/dz_i = (1/N) sum_j g_ij (z_i - u_j),  dL/du_j = -(1/N) sum_i g_ij (z_i - u_j)
/// with g_ij = (alpha + 1) (p_ij - q_ij) / (alpha + |z_i - u_j|^2).
ClusteringGradients clustering_gradients(const Matrix& embeddings, const Matrix& centers, const Matrix& p,
                                         double alpha = 1.0);

/// argmax per row; ties go to the lowest index.
std::vector<int> hard_labels(const Matrix& q);

/// Fraction of positions where the two label vectors differ.
double label_change_fraction(std::span<const int> before, std::span<const int> after);

/// Row entropy (natural log).
double row_entropy(const Matrix& m, int row);

}  // namespace sqa::dcec
