#pragma once

#include <cstdint>
#include <vector>

#include "sqa/dcec/assignments.hpp"

namespace sqa::dcec {

struct KMeansOptions {
  int clusters = 5;
  int restarts = 10;
  int max_iterations = 300;
  double tolerance = 1e-10;  // stop when no center moves further than this
  std::uint64_t seed = 0;
};

struct KMeansResult {
  Matrix centers;
  std::vector<int> labels;
  double inertia = 0.0;
  int iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding; the restart with the lowest
/// inertia wins (earliest restart on ties). An empty cluster is re-seeded at
/// the point farthest from its assigned center.
KMeansResult kmeans(const Matrix& points, const KMeansOptions& opts);

}  // namespace sqa::dcec
