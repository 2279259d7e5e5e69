#include <doctest.h>

#include "helpers.hpp"
#include "sqa/common/error.hpp"
#include "sqa/nn/checkpoint.hpp"
#include "sqa/nn/kernels.hpp"
#include "sqa/nn/model.hpp"

using namespace sqa;
using namespace sqa::nn;

namespace {

std::vector<float> randn(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

Tensor random_input(int n, int bands, int frames, std::uint64_t seed) {
  Tensor x({n, 1, bands, frames});
  const auto v = randn(x.size(), seed);
  std::copy(v.begin(), v.end(), x.data());
  return x;
}

double max_rel_diff(std::span<const float> a, std::span<const float> b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - b[i]) / (1.0 + std::abs(static_cast<double>(b[i]))));
  return worst;
}

ConvNetSpec tiny_convnet() {
  ConvNetSpec cn;
  cn.input_bands = 8;
  cn.input_frames = 12;
  cn.layers = {{3, 3}, {4, 3}};
  return cn;
}

ModelSpec with_hidden(ModelSpec s, int hidden) {
  if (s.classification) s.classification->hidden = hidden;
  if (s.regression) s.regression->hidden = hidden;
  return s;
}

}  // namespace

TEST_CASE("same padding output size") {
  CHECK(same_output(64, 2) == 32);
  CHECK(same_output(798, 2) == 399);
  CHECK(same_output(399, 2) == 200);
  CHECK(same_output(1, 2) == 1);
}

TEST_CASE("parallel kernels match the serial reference") {
  struct Case { int n, ci, h, w, co, k, s; };
  for (const Case c : {Case{2, 1, 9, 13, 4, 5, 2}, Case{3, 4, 8, 7, 5, 3, 2}, Case{1, 2, 5, 5, 3, 3, 1}, Case{2, 3, 1, 6, 2, 3, 2}}) {
    const auto g = ConvGeometry::same(c.n, c.ci, c.h, c.w, c.co, c.k, c.s);
    const auto x = randn(g.input_size(), 1), w = randn(g.weight_size(), 2), dy = randn(g.output_size(), 3);
    std::vector<float> y1(g.output_size()), y2(g.output_size());
    kernels::conv2d_forward(g, x, w, y1);
    reference::conv2d_forward(g, x, w, y2);
    CHECK(max_rel_diff(y1, y2) < 1e-5);
    std::vector<float> dx1(g.input_size()), dx2(g.input_size());
    kernels::conv2d_backward_data(g, dy, w, dx1);
    reference::conv2d_backward_data(g, dy, w, dx2);
    CHECK(max_rel_diff(dx1, dx2) < 1e-5);
    std::vector<float> dw1(g.weight_size()), dw2(g.weight_size());
    kernels::conv2d_backward_weights(g, x, dy, dw1);
    reference::conv2d_backward_weights(g, x, dy, dw2);
    CHECK(max_rel_diff(dw1, dw2) < 1e-5);
  }
  const int n = 5, in = 17, out = 6;
  const auto x = randn(n * in, 4), w = randn(out * in, 5), dy = randn(n * out, 6);
  std::vector<float> y1(n * out), y2(n * out), dx1(n * in), dx2(n * in), dw1(out * in), dw2(out * in);
  kernels::dense_forward(n, in, out, x, w, y1);
  reference::dense_forward(n, in, out, x, w, y2);
  CHECK(max_rel_diff(y1, y2) < 1e-5);
  kernels::dense_backward_data(n, in, out, dy, w, dx1);
  reference::dense_backward_data(n, in, out, dy, w, dx2);
  CHECK(max_rel_diff(dx1, dx2) < 1e-5);
  kernels::dense_backward_weights(n, in, out, x, dy, dw1);
  reference::dense_backward_weights(n, in, out, x, dy, dw2);
  CHECK(max_rel_diff(dw1, dw2) < 1e-5);
}

TEST_CASE("encoder output shapes follow ceil division by 16") {
  ConvNetSpec cn;
  CHECK(cn.latent_shape() == std::array<int, 3>{256, 4, 50});
  Model m(ModelSpec::classifier(cn), 1);
  const auto latent = m.encode(random_input(1, 64, 798, 1), Mode::kEval);
  CHECK(latent.shape() == std::vector<int>{1, 256, 4, 50});
  cn.input_frames = 16;
  CHECK(cn.latent_shape() == std::array<int, 3>{256, 4, 1});
  Model small(ModelSpec::autoencoder(cn), 1);
  const auto r = small.forward(random_input(2, 64, 16, 2), Mode::kEval);
  CHECK(r.latent.shape() == std::vector<int>{2, 256, 4, 1});
  CHECK(r.reconstruction.shape() == std::vector<int>{2, 1, 64, 16});
  CHECK_THROWS_AS(small.encode(random_input(1, 64, 17, 1), Mode::kEval), Error);
}

TEST_CASE("decoder mirrors the full-size input") {
  Model m(ModelSpec::autoencoder(), 3);
  const auto r = m.forward(random_input(1, 64, 798, 3), Mode::kEval);
  CHECK(r.reconstruction.shape() == std::vector<int>{1, 1, 64, 798});
}

TEST_CASE("zero input with fresh batch-norm gives a zero latent") {
  Model m(ModelSpec::classifier(tiny_convnet()), 4);
  const auto latent = m.encode(Tensor({2, 1, 8, 12}), Mode::kEval);
  for (float v : latent.values()) CHECK(v == 0.0f);
}

TEST_CASE("head output ranges") {
  auto cn = tiny_convnet();
  Model m(with_hidden(ModelSpec::task(cn, true, true), 16), 5);
  const auto ls = cn.latent_shape();
  for (int trial = 0; trial < 10; ++trial) {
    Tensor latent({100, ls[0], ls[1], ls[2]});
    const auto v = randn(latent.size(), 100 + trial);
    for (std::size_t i = 0; i < v.size(); ++i) latent[i] = 20.0f * v[i];
    const auto reg = m.head_forward(latent, HeadKind::kRegression, Mode::kEval);
    for (float y : reg.mos.values()) {
      CHECK(y > 1.0f);
      CHECK(y < 5.0f);
    }
    const auto cls = m.head_forward(latent, HeadKind::kClassification, Mode::kEval);
    for (int i = 0; i < 100; ++i) {
      double s = 0;
      for (int j = 0; j < 5; ++j) s += cls.class_probs[static_cast<std::size_t>(i) * 5 + j];
      CHECK(std::abs(s - 1.0) < 1e-6);
    }
  }
  Model d(ModelSpec::dcec_model(cn), 6);
  const auto r = d.forward(random_input(7, 8, 12, 6), Mode::kEval);
  CHECK(r.embedding.shape() == std::vector<int>{7, 10});
  CHECK(r.soft_assign.shape() == std::vector<int>{7, 5});
  for (int i = 0; i < 7; ++i) {
    double s = 0;
    for (int j = 0; j < 5; ++j) s += r.soft_assign[static_cast<std::size_t>(i) * 5 + j];
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
  CHECK_THROWS_AS(m.head_forward(Tensor({1, ls[0], ls[1], ls[2]}), HeadKind::kDcec, Mode::kEval), Error);
}

TEST_CASE("analytic gradients agree with finite differences") {
  auto cn = tiny_convnet();
  for (const auto& spec : {with_hidden(ModelSpec::task(cn, true, true), 6), ModelSpec::autoencoder(cn)}) {
    Model m(spec, 7);
    const auto x = random_input(3, 8, 12, 8);
    const std::uint64_t dseed = 99;
    // Objective: fixed random projection of every output.
    auto probe = m.forward(x, Mode::kTrain, dseed);
    OutputGrads c;
    const auto fill = [](const Tensor& like, std::uint64_t seed) {
      if (like.empty()) return Tensor{};
      Tensor t(like.shape());
      const auto v = randn(t.size(), seed);
      std::copy(v.begin(), v.end(), t.data());
      return t;
    };
    c.class_logits = fill(probe.class_logits, 11);
    c.mos = fill(probe.mos, 12);
    c.embedding = fill(probe.embedding, 13);
    c.reconstruction = fill(probe.reconstruction, 14);
    const auto objective = [&]() {
      const auto r = m.forward(x, Mode::kTrain, dseed);
      double s = 0;
      const auto dot = [&](const Tensor& a, const Tensor& b) {
        for (std::size_t i = 0; i < b.size(); ++i) s += static_cast<double>(a[i]) * b[i];
      };
      dot(r.class_logits, c.class_logits);
      dot(r.mos, c.mos);
      dot(r.embedding, c.embedding);
      dot(r.reconstruction, c.reconstruction);
      return s;
    };
    m.zero_grad();
    m.forward(x, Mode::kTrain, dseed);
    m.backward(c);
    int checked = 0, bad = 0;
    Rng pick(3);
    for (auto& p : m.trainable()) {
      if (p.name == "clustering.centers") continue;  // not part of this objective
      for (int s = 0; s < 6; ++s) {
        const std::size_t i = pick() % p.value->size();
        const float orig = (*p.value)[i];
        const double an = (*p.grad)[i];
        // A kink inside [x-h, x+h] spoils one step size but rarely two.
        bool ok = false;
        for (float rel : {1e-3f, 1e-4f}) {
          const float h = rel * std::max(1.0f, std::abs(orig));
          (*p.value)[i] = orig + h;
          const double up = objective();
          (*p.value)[i] = orig - h;
          const double down = objective();
          (*p.value)[i] = orig;
          const double fd = (up - down) / (static_cast<double>(orig + h) - (orig - h));
          ok |= std::abs(fd - an) <= 2e-2 + 5e-2 * std::abs(an);
        }
        ++checked;
        if (!ok) ++bad;
      }
    }
    CHECK(checked > 50);
    // ReLU kinks can flip a handful of central differences.
    CHECK(bad <= checked / 50);
  }
}

TEST_CASE("checkpoint round trip reproduces outputs exactly") {
  testing::TempDir dir("ckpt");
  auto cn = tiny_convnet();
  Model m(ModelSpec::dcec_model(cn), 9);
  const auto x = random_input(4, 8, 12, 9);
  m.forward(x, Mode::kTrain, 1);  // move batch-norm running stats off their defaults
  const auto before = m.forward(x, Mode::kEval);
  save_checkpoint(capture(m, "dcec", 9, "abc"), dir.path / "m.ckpt");
  const auto ck = load_checkpoint(dir.path / "m.ckpt");
  CHECK(ck.stage == "dcec");
  CHECK(ck.seed == 9);
  CHECK(ck.config_hash == "abc");
  Model back = instantiate(ck);
  const auto after = back.forward(x, Mode::kEval);
  CHECK(after.reconstruction == before.reconstruction);
  CHECK(after.soft_assign == before.soft_assign);
  CHECK(after.latent == before.latent);

  Model other(ModelSpec::classifier(cn), 1);
  CHECK_THROWS_AS(restore(other, ck), Error);
  std::filesystem::resize_file(dir.path / "m.ckpt", 40);
  CHECK_THROWS_AS(load_checkpoint(dir.path / "m.ckpt"), Error);
}

TEST_CASE("multi-task transfer carries the classifier and adds regression") {
  auto cn = tiny_convnet();
  Model src(ModelSpec::classifier(cn), 10);
  const auto x = random_input(2, 8, 12, 10);
  src.forward(x, Mode::kTrain, 1);
  const auto ck = capture(src, "degr_classifier", 10, "h");
  Model dst(ModelSpec::task(cn, true, true), 11);
  const auto report = transfer_weights(ck, dst);
  CHECK(report.is_carried("convnet"));
  CHECK(report.is_carried("classification"));
  CHECK(report.initialized == std::vector<std::string>{"regression"});
  CHECK(report.render().find("new=regression") != std::string::npos);
  CHECK(dst.encode(x, Mode::kEval) == src.encode(x, Mode::kEval));
}

TEST_CASE("self-supervised transfer keeps only the convnet") {
  auto cn = tiny_convnet();
  Model src(ModelSpec::dcec_model(cn), 12);
  Model dst(ModelSpec::task(cn, true, true), 13);
  const auto report = transfer_weights(capture(src, "dcec", 12, "h"), dst);
  CHECK(report.carried == std::vector<std::string>{"convnet"});
  CHECK(std::find(report.dropped.begin(), report.dropped.end(), "embedding") != report.dropped.end());
  CHECK(std::find(report.dropped.begin(), report.dropped.end(), "decoder") != report.dropped.end());
  const auto x = random_input(2, 8, 12, 12);
  CHECK(dst.encode(x, Mode::kEval) == src.encode(x, Mode::kEval));
}

TEST_CASE("transfer between different convnets is refused") {
  auto cn = tiny_convnet();
  auto wide = cn;
  wide.layers[1].kernels = 8;
  Model src(ModelSpec::classifier(cn), 1);
  Model dst(ModelSpec::task(wide, true, true), 1);
  CHECK_THROWS_AS(transfer_weights(capture(src, "degr_classifier", 1, "h"), dst), Error);
}

TEST_CASE("every variant shares the same convnet parameter count") {
  ConvNetSpec cn;
  std::vector<ModelSpec> specs = {ModelSpec::autoencoder(cn), ModelSpec::dcec_model(cn), ModelSpec::classifier(cn),
                                  ModelSpec::task(cn, false, true), ModelSpec::task(cn, true, true)};
  // conv weights + bias + bn gamma/beta per layer
  std::size_t expect = 0;
  int in = 1;
  for (const auto& l : cn.layers) {
    expect += static_cast<std::size_t>(l.kernels) * in * l.kernel_size * l.kernel_size + 3 * l.kernels;
    in = l.kernels;
  }
  for (const auto& s : specs) {
    Model m(s, 0);
    CHECK(m.parameter_count("convnet") == expect);
  }
}

TEST_CASE("forward is deterministic for a fixed seed") {
  auto cn = tiny_convnet();
  Model a(ModelSpec::task(cn, true, true), 21), b(ModelSpec::task(cn, true, true), 21);
  const auto x = random_input(3, 8, 12, 21);
  const auto ra = a.forward(x, Mode::kTrain, 5), rb = b.forward(x, Mode::kTrain, 5);
  CHECK(ra.mos == rb.mos);
  CHECK(ra.class_logits == rb.class_logits);
}
