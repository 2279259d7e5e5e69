#include "sqa/dcec/kmeans.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "sqa/common/error.hpp"
#include "sqa/common/rng.hpp"

namespace sqa::dcec {
namespace {

double sqdist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

Matrix seed_centers(const Matrix& x, int k, Rng& rng) {
  Matrix c(k, x.cols);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto copy_row = [&](int dst, int src) {
    for (int t = 0; t < x.cols; ++t) c(dst, t) = x(src, t);
  };
  copy_row(0, static_cast<int>(rng() % static_cast<std::uint64_t>(x.rows)));
  std::vector<double> d2(x.rows, std::numeric_limits<double>::infinity());
  for (int j = 1; j < k; ++j) {
    double total = 0.0;
    for (int i = 0; i < x.rows; ++i) {
      d2[i] = std::min(d2[i], sqdist(x.row(i), c.row(j - 1)));
      total += d2[i];
    }
    int pick = x.rows - 1;
    if (total > 0.0) {
      double r = unit(rng) * total;
      for (int i = 0; i < x.rows; ++i) {
        r -= d2[i];
        if (r < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      // Every point coincides with a chosen center; any point will do.
      pick = static_cast<int>(rng() % static_cast<std::uint64_t>(x.rows));
    }
    copy_row(j, pick);
  }
  return c;
}

double assign(const Matrix& x, const Matrix& c, std::vector<int>& labels, std::vector<double>& dist) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < x.rows; ++i) {
    int best = 0;
    double bd = sqdist(x.row(i), c.row(0));
    for (int j = 1; j < c.rows; ++j) {
      const double d = sqdist(x.row(i), c.row(j));
      if (d < bd) {
        bd = d;
        best = j;
      }
    }
    labels[i] = best;
    dist[i] = bd;
  }
  double inertia = 0.0;
  for (double d : dist) inertia += d;
  return inertia;
}

KMeansResult run_once(const Matrix& x, const KMeansOptions& opts, Rng& rng) {
  KMeansResult r;
  r.centers = seed_centers(x, opts.clusters, rng);
  r.labels.assign(x.rows, 0);
  std::vector<double> dist(x.rows);
  for (r.iterations = 1; r.iterations <= opts.max_iterations; ++r.iterations) {
    assign(x, r.centers, r.labels, dist);
    Matrix next(opts.clusters, x.cols);
    std::vector<int> counts(opts.clusters, 0);
    for (int i = 0; i < x.rows; ++i) {
      ++counts[r.labels[i]];
      for (int t = 0; t < x.cols; ++t) next(r.labels[i], t) += x(i, t);
    }
    for (int j = 0; j < opts.clusters; ++j) {
      if (counts[j] == 0) {
        int far = 0;
        for (int i = 1; i < x.rows; ++i)
          if (dist[i] > dist[far]) far = i;
        for (int t = 0; t < x.cols; ++t) next(j, t) = x(far, t);
        dist[far] = 0.0;
        continue;
      }
      for (int t = 0; t < x.cols; ++t) next(j, t) /= counts[j];
    }
    double shift = 0.0;
    for (int j = 0; j < opts.clusters; ++j) shift = std::max(shift, sqdist(next.row(j), r.centers.row(j)));
    r.centers = std::move(next);
    if (shift <= opts.tolerance * opts.tolerance) break;
  }
  r.iterations = std::min(r.iterations, opts.max_iterations);
  r.inertia = assign(x, r.centers, r.labels, dist);
  return r;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, const KMeansOptions& opts) {
  if (opts.clusters < 1) throw Error(errc::kInvalidArgument, "k-means needs at least one cluster");
  if (points.rows < opts.clusters)
    throw Error(errc::kInvalidArgument, "k-means: " + std::to_string(points.rows) + " points for " +
                                            std::to_string(opts.clusters) + " clusters");
  for (double v : points.data)
    if (!std::isfinite(v)) throw Error(errc::kNumeric, "k-means: non-finite embedding");
  KMeansResult best;
  for (int r = 0; r < std::max(1, opts.restarts); ++r) {
    Rng rng(derive_seed(opts.seed, "kmeans", static_cast<std::uint64_t>(r)));
    auto run = run_once(points, opts, rng);
    if (r == 0 || run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

}  // namespace sqa::dcec
