#include <doctest.h>

#include <numeric>

#include "../support/blobs.hpp"
#include "helpers.hpp"
#include "sqa/common/error.hpp"
#include "sqa/dcec/assignments.hpp"
#include "sqa/dcec/kmeans.hpp"
#include "sqa/dcec/trainer.hpp"
#include "sqa/train/trainer.hpp"

using namespace sqa;
using namespace sqa::dcec;

namespace {

Matrix random_matrix(int r, int c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(r, c);
  for (auto& v : m.data) v = g(rng);
  return m;
}

// Direct formula with alpha = 1, long double accumulation.
Matrix oracle_q(const Matrix& z, const Matrix& u) {
  Matrix q(z.rows, u.rows);
  for (int i = 0; i < z.rows; ++i) {
    long double total = 0;
    std::vector<long double> k(u.rows);
    for (int j = 0; j < u.rows; ++j) {
      long double d2 = 0;
      for (int t = 0; t < z.cols; ++t) d2 += (static_cast<long double>(z(i, t)) - u(j, t)) * (z(i, t) - u(j, t));
      k[j] = 1.0L / (1.0L + d2);
      total += k[j];
    }
    for (int j = 0; j < u.rows; ++j) q(i, j) = static_cast<double>(k[j] / total);
  }
  return q;
}

Matrix oracle_p(const Matrix& q) {
  Matrix p(q.rows, q.cols);
  for (int i = 0; i < q.rows; ++i) {
    long double total = 0;
    std::vector<long double> w(q.cols);
    for (int j = 0; j < q.cols; ++j) {
      long double f = 0;
      for (int r = 0; r < q.rows; ++r) f += q(r, j);
      w[j] = static_cast<long double>(q(i, j)) * q(i, j) / f;
      total += w[j];
    }
    for (int j = 0; j < q.cols; ++j) p(i, j) = static_cast<double>(w[j] / total);
  }
  return p;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
  return worst;
}

Matrix row_stochastic(int n, int j, Rng& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Matrix m(n, j);
  for (int i = 0; i < n; ++i) {
    double s = 0;
    for (int k = 0; k < j; ++k) s += m(i, k) = u(rng);
    for (int k = 0; k < j; ++k) m(i, k) /= s;
  }
  return m;
}

}  // namespace

TEST_CASE("soft assignment hand cases") {
  Matrix z(1, 1), u(2, 1);
  u(1, 0) = 1.0;
  const auto q = soft_assign(z, u);
  CHECK(q(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(q(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  Rng rng(1);
  const auto one = soft_assign(random_matrix(6, 3, rng), random_matrix(1, 3, rng));
  for (double v : one.data) CHECK(v == 1.0);
  Matrix bad = random_matrix(2, 3, rng);
  bad(1, 1) = std::nan("");
  CHECK_THROWS_AS(soft_assign(bad, random_matrix(2, 3, rng)), Error);
}

TEST_CASE("target distribution hand cases") {
  Matrix q(2, 2);
  q.data = {0.9, 0.1, 0.6, 0.4};
  const auto p = target_distribution(q);
  CHECK(p(0, 0) == doctest::Approx(0.9643).epsilon(1e-4));
  CHECK(p(0, 1) == doctest::Approx(0.0357).epsilon(1e-3));
  CHECK(p(1, 0) == doctest::Approx(0.4286).epsilon(1e-4));
  CHECK(p(1, 1) == doctest::Approx(0.5714).epsilon(1e-4));
  Rng rng(2);
  const auto single = row_stochastic(1, 4, rng);
  CHECK(target_distribution(single).data == single.data);
  Matrix uniform(5, 4, 0.25);
  for (double v : target_distribution(uniform).data) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("soft assignment and target distribution match direct oracles") {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 10), j = 1 + static_cast<int>(rng() % 4), d = 1 + static_cast<int>(rng() % 5);
    const auto z = random_matrix(n, d, rng), u = random_matrix(j, d, rng);
    const auto q = soft_assign(z, u);
    CHECK(max_abs_diff(q, oracle_q(z, u)) < 1e-10);
    const auto p = target_distribution(q);
    CHECK(max_abs_diff(p, oracle_p(q)) < 1e-10);
    for (int i = 0; i < n; ++i) {
      double sq = 0, sp = 0;
      for (int k = 0; k < j; ++k) {
        sq += q(i, k);
        sp += p(i, k);
        CHECK(q(i, k) > 0.0);
        CHECK(p(i, k) > 0.0);
      }
      CHECK(std::abs(sq - 1) < 1e-6);
      CHECK(std::abs(sp - 1) < 1e-6);
    }
    for (double f : cluster_frequencies(q)) CHECK(f > 0.0);
  }
}

TEST_CASE("KL divergence is non-negative and zero only at P = Q") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto q = row_stochastic(5, 3, rng), p = row_stochastic(5, 3, rng);
    CHECK(kl_divergence(p, q) > 0.0);
    CHECK(kl_divergence(q, q) == 0.0);
  }
  Matrix p(1, 2), q(1, 2);
  p.data = {1.0, 0.0};
  q.data = {0.5, 0.5};
  CHECK(kl_divergence(p, q) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("clustering gradients match central differences") {
  Rng rng(5);
  int checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 8), j = 2 + static_cast<int>(rng() % 2), d = 1 + static_cast<int>(rng() % 4);
    auto z = random_matrix(n, d, rng), u = random_matrix(j, d, rng);
    const auto p = row_stochastic(n, j, rng);
    const auto g = clustering_gradients(z, u, p);
    const auto loss = [&] { return kl_divergence(p, soft_assign(z, u)); };
    const auto probe = [&](Matrix& m, const Matrix& grad) {
      for (std::size_t i = 0; i < m.data.size(); ++i) {
        const double orig = m.data[i], h = 1e-6;
        m.data[i] = orig + h;
        const double up = loss();
        m.data[i] = orig - h;
        const double down = loss();
        m.data[i] = orig;
        const double fd = (up - down) / (2 * h);
        const double an = grad.data[i];
        CHECK(std::abs(fd - an) <= 1e-3 * std::max(std::abs(an), 1e-4));
        ++checked;
      }
    };
    probe(z, g.d_embeddings);
    probe(u, g.d_centers);
  }
  CHECK(checked > 200);
}

TEST_CASE("hard labels pick the nearest center") {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const auto z = random_matrix(8, 3, rng), u = random_matrix(4, 3, rng);
    const auto labels = hard_labels(soft_assign(z, u));
    for (int i = 0; i < 8; ++i) {
      int best = 0;
      double bd = 1e300;
      for (int j = 0; j < 4; ++j) {
        double d2 = 0;
        for (int t = 0; t < 3; ++t) d2 += (z(i, t) - u(j, t)) * (z(i, t) - u(j, t));
        if (d2 < bd) bd = d2, best = j;
      }
      CHECK(labels[i] == best);
    }
  }
  Matrix q(2, 5);
  q.data = {0.1, 0.2, 0.4, 0.2, 0.1, 0.5, 0.5, 0, 0, 0};
  CHECK(hard_labels(q) == std::vector<int>{2, 0});
  const std::vector<int> a{0, 1, 2, 3}, b{0, 1, 0, 3};
  CHECK(label_change_fraction(a, b) == 0.25);
}

TEST_CASE("target distribution sharpens rows when frequencies are balanced") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    // Every cyclic shift of one row gives equal column sums.
    const auto base = row_stochastic(1, 4, rng);
    Matrix q(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) q(i, j) = base(0, (i + j) % 4);
    const auto p = target_distribution(q);
    for (int i = 0; i < 4; ++i) CHECK(row_entropy(p, i) <= row_entropy(q, i) + 1e-12);
  }
}

TEST_CASE("k-means recovers two blobs") {
  Rng rng(8);
  std::normal_distribution<double> g(0.0, 0.2);
  Matrix pts(200, 2);
  for (int i = 0; i < 200; ++i) {
    const double cx = i % 2 ? 5.0 : -5.0;
    pts(i, 0) = cx + g(rng);
    pts(i, 1) = 1.0 + g(rng);
  }
  KMeansOptions opts;
  opts.clusters = 2;
  opts.seed = 1;
  const auto r = kmeans(pts, opts);
  // Oracle: the empirical blob means.
  double m0[2] = {0, 0}, m1[2] = {0, 0};
  for (int i = 0; i < 200; ++i) {
    double* m = i % 2 ? m1 : m0;
    m[0] += pts(i, 0) / 100;
    m[1] += pts(i, 1) / 100;
  }
  const int hi = r.centers(0, 0) > r.centers(1, 0) ? 0 : 1;
  CHECK(std::abs(r.centers(hi, 0) - m1[0]) < 0.1);
  CHECK(std::abs(r.centers(hi, 1) - m1[1]) < 0.1);
  CHECK(std::abs(r.centers(1 - hi, 0) - m0[0]) < 0.1);
  CHECK(std::abs(r.centers(1 - hi, 1) - m0[1]) < 0.1);
  const auto again = kmeans(pts, opts);
  CHECK(again.centers.data == r.centers.data);
  CHECK(again.labels == r.labels);
}

TEST_CASE("k-means with N = J returns the points") {
  Rng rng(9);
  const auto pts = random_matrix(5, 3, rng);
  KMeansOptions opts;
  opts.clusters = 5;
  const auto r = kmeans(pts, opts);
  CHECK(r.inertia == 0.0);
  std::vector<std::vector<double>> a, b;
  for (int i = 0; i < 5; ++i) {
    a.emplace_back(pts.row(i).begin(), pts.row(i).end());
    b.emplace_back(r.centers.row(i).begin(), r.centers.row(i).end());
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);
  opts.clusters = 6;
  CHECK_THROWS_AS(kmeans(pts, opts), Error);
}

TEST_CASE("dcec loss decomposes into reconstruction and clustering terms") {
  auto cn = testing::toy_convnet(8, 8);
  nn::Model model(nn::ModelSpec::dcec_model(cn), 3);
  Rng rng(10);
  DcecConfig cfg;
  for (int trial = 0; trial < 5; ++trial) {
    const auto data = testing::two_blobs(6, 8, 8, 0.5, 20 + trial);
    std::vector<std::size_t> rows(6);
    std::iota(rows.begin(), rows.end(), 0);
    const auto x = data.batch(rows);
    const auto p = row_stochastic(6, 5, rng);
    const auto loss = dcec_loss(model, x, p, cfg, nn::Mode::kEval);
    const auto out = model.forward(x, nn::Mode::kEval);
    double lr = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = static_cast<double>(out.reconstruction[i]) - x[i];
      lr += d * d;
    }
    lr /= static_cast<double>(x.size());
    Matrix q(6, 5);
    for (std::size_t i = 0; i < q.data.size(); ++i) q.data[i] = out.soft_assign[i];
    double lc = 0;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 5; ++j) lc += p(i, j) * std::log(p(i, j) / q(i, j));
    lc /= 6;
    CHECK(std::abs(loss.reconstruction - lr) < 1e-8);
    CHECK(std::abs(loss.clustering - lc) < 1e-6);
    CHECK(std::abs(loss.total - (loss.reconstruction + 0.1 * loss.clustering)) < 1e-8);
    // P = Q: no clustering term.
    const auto self = assign_cluster_labels(model, data);
    const auto eq = dcec_loss(model, x, self.q, cfg, nn::Mode::kEval);
    CHECK(std::abs(eq.clustering) < 1e-6);
    CHECK(std::abs(eq.total - eq.reconstruction) < 1e-7);
  }
}

TEST_CASE("cluster labels do not depend on extraction order") {
  auto cn = testing::toy_convnet(8, 8);
  nn::Model model(nn::ModelSpec::dcec_model(cn), 4);
  const auto data = testing::two_blobs(30, 8, 8, 0.5, 3);
  const auto a = assign_cluster_labels(model, data, 7);
  std::vector<std::size_t> rev(30);
  for (std::size_t i = 0; i < 30; ++i) rev[i] = 29 - i;
  const auto b = assign_cluster_labels(model, data.subset(rev), 4);
  for (std::size_t i = 0; i < 30; ++i) CHECK(a.labels[i] == b.labels[29 - i]);
}

TEST_CASE("dcec converges with a refresh every batch") {
  auto cn = testing::toy_convnet(8, 8);
  const auto data = testing::two_blobs(40, 8, 8, 0.3, 5);
  train::StageParams params;
  params.epochs = 5;
  params.batch_size = 8;
  params.seed = 3;
  auto ae = train::pretrain_autoencoder(data, cn, params);
  const auto ckpt = nn::capture(ae.model, "ae_pretrain", 3, "");
  DcecConfig cfg;
  cfg.clusters = 2;
  cfg.refresh_batches = 1;
  params.epochs = 30;
  const auto r = train_dcec(data, ckpt, cfg, params);
  CHECK(r.converged);
  REQUIRE_FALSE(r.label_changes.empty());
  CHECK(r.label_changes.back() < 0.001);
  CHECK(r.labels.size() == 40);
  CHECK_THROWS_AS(train_dcec(data, nn::capture(ae.model, "dcec", 3, ""), cfg, params), Error);
}
