#include "sqa/nn/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sqa/common/error.hpp"
#include "sqa/common/hash.hpp"
#include "sqa/common/rng.hpp"
#include "sqa/dcec/assignments.hpp"

namespace sqa::nn {

// -- specs ----------------------------------------------------------------------

std::array<int, 3> ConvNetSpec::shape_at(std::size_t i) const {
  std::array<int, 3> s{1, input_bands, input_frames};
  for (std::size_t l = 0; l < i && l < layers.size(); ++l)
    s = {layers[l].kernels, same_output(s[1], stride), same_output(s[2], stride)};
  return s;
}

int ConvNetSpec::flat_size() const {
  const auto s = latent_shape();
  return s[0] * s[1] * s[2];
}

std::string ConvNetSpec::descriptor() const {
  std::ostringstream ss;
  ss << "convnet(input=" << input_bands << "x" << input_frames << ",stride=" << stride << ",layers=";
  for (std::size_t i = 0; i < layers.size(); ++i)
    ss << (i ? "," : "") << "L" << layers[i].kernels << "k" << layers[i].kernel_size;
  ss << ",order=conv-bn-relu,padding=same)";
  return ss.str();
}

void ConvNetSpec::validate() const {
  if (input_bands < 1 || input_frames < 1) throw Error(errc::kConfig, "convnet input must be non-empty");
  if (stride < 1) throw Error(errc::kConfig, "convnet stride must be positive");
  if (layers.empty()) throw Error(errc::kConfig, "convnet needs at least one layer");
  for (const auto& l : layers)
    if (l.kernels < 1 || l.kernel_size < 1) throw Error(errc::kConfig, "convnet layer sizes must be positive");
}

std::string_view to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::kClassification: return "classification";
    case HeadKind::kRegression: return "regression";
    case HeadKind::kDcec: return "dcec";
  }
  return "unknown";
}

std::string HeadSpec::descriptor() const {
  std::ostringstream ss;
  ss << to_string(kind) << "(hidden=" << hidden << ",dropout=" << dropout << ",outputs=" << outputs
     << ",embedding=" << embedding_dim << ")";
  return ss.str();
}

ModelSpec ModelSpec::autoencoder(ConvNetSpec convnet) {
  ModelSpec s;
  s.convnet = std::move(convnet);
  s.dcec = HeadSpec::dcec();
  s.decoder = true;
  s.clustering = false;
  return s;
}

ModelSpec ModelSpec::dcec_model(ConvNetSpec convnet) {
  ModelSpec s = autoencoder(std::move(convnet));
  s.clustering = true;
  return s;
}

ModelSpec ModelSpec::classifier(ConvNetSpec convnet, int classes) {
  return task(std::move(convnet), true, false, classes);
}

ModelSpec ModelSpec::task(ConvNetSpec convnet, bool with_classification, bool with_regression, int classes) {
  ModelSpec s;
  s.convnet = std::move(convnet);
  if (with_classification) s.classification = HeadSpec::classification(classes);
  if (with_regression) s.regression = HeadSpec::regression();
  return s;
}

std::string ModelSpec::descriptor() const {
  std::ostringstream ss;
  ss << convnet.descriptor();
  if (classification) ss << "+" << classification->descriptor();
  if (regression) ss << "+" << regression->descriptor();
  if (dcec) ss << "+" << dcec->descriptor() << (clustering ? "[clustering]" : "[embedding-only]");
  if (decoder) ss << "+decoder(mirror)";
  return ss.str();
}

std::uint64_t ModelSpec::hash() const { return fnv1a64(descriptor()); }

std::string_view group_of(std::string_view param_name) { return param_name.substr(0, param_name.find('.')); }

// -- model --------------------------------------------------------------------------

namespace {

struct EncoderBlock {
  Conv2d conv;
  BatchNorm2d bn;
  Relu relu;
};

struct DecoderBlock {
  ConvTranspose2d deconv;
  std::optional<BatchNorm2d> bn;
  Relu relu;
};

struct MlpHead {
  Dense fc1;
  Relu relu;
  Dropout dropout;
  Dense fc2;
};

}  // namespace

struct Model::Impl {
  std::vector<EncoderBlock> encoder;
  std::optional<MlpHead> classification;
  std::optional<MlpHead> regression;
  std::optional<Dense> embedding;
  Tensor centers, centers_grad;
  std::optional<Dense> decoder_fc;
  Relu decoder_relu;
  std::vector<DecoderBlock> decoder;

  std::vector<int> latent_shape;
  Tensor last_mos;
  bool ran_classification = false, ran_regression = false, ran_embedding = false, ran_decoder = false;
  Mode last_mode = Mode::kEval;
};

Model::Model(ModelSpec spec, std::uint64_t init_seed) : spec_(std::move(spec)), impl_(std::make_unique<Impl>()) {
  spec_.convnet.validate();
  if (spec_.decoder && !spec_.dcec) throw Error(errc::kConfig, "a decoder needs the dcec embedding layer");
  auto& m = *impl_;
  const auto& cn = spec_.convnet;
  const auto rng_for = [init_seed](const std::string& name) { return Rng(derive_seed(init_seed, name)); };

  int in_c = 1;
  for (std::size_t i = 0; i < cn.layers.size(); ++i) {
    const auto& l = cn.layers[i];
    m.encoder.push_back({Conv2d(in_c, l.kernels, l.kernel_size, cn.stride), BatchNorm2d(l.kernels), Relu{}});
    auto rng = rng_for("convnet." + std::to_string(i));
    m.encoder.back().conv.init(rng);
    in_c = l.kernels;
  }
  const int flat = cn.flat_size();
  const auto make_mlp = [&](const HeadSpec& h, const std::string& name) {
    MlpHead head{Dense(flat, h.hidden), Relu{}, Dropout(h.dropout), Dense(h.hidden, h.outputs)};
    auto r1 = rng_for(name + ".fc1");
    head.fc1.init(r1);
    auto r2 = rng_for(name + ".fc2");
    head.fc2.init(r2);
    return head;
  };
  if (spec_.classification) {
    if (spec_.classification->kind != HeadKind::kClassification) throw Error(errc::kConfig, "classification slot holds a different head kind");
    m.classification = make_mlp(*spec_.classification, "classification");
  }
  if (spec_.regression) {
    if (spec_.regression->kind != HeadKind::kRegression || spec_.regression->outputs != 1)
      throw Error(errc::kConfig, "regression head must have kind regression and one output");
    m.regression = make_mlp(*spec_.regression, "regression");
  }
  if (spec_.dcec) {
    const auto& d = *spec_.dcec;
    if (d.kind != HeadKind::kDcec) throw Error(errc::kConfig, "dcec slot holds a different head kind");
    m.embedding.emplace(flat, d.embedding_dim);
    auto r = rng_for("embedding.fc");
    m.embedding->init(r);
    if (spec_.clustering) {
      m.centers = Tensor({d.outputs, d.embedding_dim});
      m.centers_grad = Tensor({d.outputs, d.embedding_dim});
      auto rc = rng_for("clustering.centers");
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (auto& v : m.centers.values()) v = static_cast<float>(gauss(rc));
    }
  }
  if (spec_.decoder) {
    m.decoder_fc.emplace(spec_.dcec->embedding_dim, flat);
    auto r = rng_for("decoder.fc");
    m.decoder_fc->init(r);
    for (std::size_t i = cn.layers.size(); i-- > 0;) {
      const auto target = cn.shape_at(i);
      const int out_c = i > 0 ? cn.layers[i - 1].kernels : 1;
      DecoderBlock block{ConvTranspose2d(cn.layers[i].kernels, out_c, cn.layers[i].kernel_size, cn.stride, target[1], target[2]),
                         std::nullopt, Relu{}};
      if (i > 0) block.bn.emplace(out_c);
      auto rd = rng_for("decoder." + std::to_string(cn.layers.size() - 1 - i));
      block.deconv.init(rd);
      m.decoder.push_back(std::move(block));
    }
  }
}

Model::~Model() = default;
Model::Model(Model&&) noexcept = default;
Model& Model::operator=(Model&&) noexcept = default;

Tensor Model::encode(const Tensor& x, Mode mode) {
  const auto& cn = spec_.convnet;
  if (x.rank() != 4 || x.dim(1) != 1 || x.dim(2) != cn.input_bands || x.dim(3) != cn.input_frames)
    throw Error(errc::kShape, "encoder expects (N, 1, " + std::to_string(cn.input_bands) + ", " +
                                  std::to_string(cn.input_frames) + "), got " + x.shape_string());
  Tensor h = x;
  for (auto& b : impl_->encoder) h = b.relu.forward(b.bn.forward(b.conv.forward(h), mode));
  impl_->latent_shape = h.shape();
  impl_->last_mode = mode;
  impl_->ran_classification = impl_->ran_regression = impl_->ran_embedding = impl_->ran_decoder = false;
  return h;
}

ForwardResult Model::head_forward(const Tensor& latent, HeadKind kind, Mode mode, std::uint64_t dropout_seed) {
  auto& m = *impl_;
  const int n = latent.dim(0);
  const int flat = spec_.convnet.flat_size();
  if (latent.size() != static_cast<std::size_t>(n) * flat)
    throw Error(errc::kShape, "latent " + latent.shape_string() + " does not match the convnet");
  Tensor flat_latent = latent;
  flat_latent.reshape({n, flat});
  ForwardResult r;
  switch (kind) {
    case HeadKind::kClassification: {
      if (!m.classification) throw Error(errc::kInvalidArgument, "model has no classification head");
      auto& h = *m.classification;
      r.class_logits = h.fc2.forward(h.dropout.forward(h.relu.forward(h.fc1.forward(flat_latent)), mode,
                                                       derive_seed(dropout_seed, "classification")));
      const int c = r.class_logits.dim(1);
      r.class_probs = Tensor({n, c});
      for (int i = 0; i < n; ++i) {
        const float* z = r.class_logits.data() + static_cast<std::size_t>(i) * c;
        float mx = z[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, z[j]);
        double total = 0.0;
        for (int j = 0; j < c; ++j) total += std::exp(static_cast<double>(z[j]) - mx);
        for (int j = 0; j < c; ++j)
          r.class_probs[static_cast<std::size_t>(i) * c + j] = static_cast<float>(std::exp(static_cast<double>(z[j]) - mx) / total);
      }
      m.ran_classification = true;
      break;
    }
    case HeadKind::kRegression: {
      if (!m.regression) throw Error(errc::kInvalidArgument, "model has no regression head");
      auto& h = *m.regression;
      Tensor z = h.fc2.forward(h.dropout.forward(h.relu.forward(h.fc1.forward(flat_latent)), mode,
                                                 derive_seed(dropout_seed, "regression")));
      r.mos = Tensor({n, 1});
      for (int i = 0; i < n; ++i) {
        const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(z[static_cast<std::size_t>(i)])));
        // Float rounding would otherwise land exactly on the bounds once the
        // sigmoid saturates.
        r.mos[static_cast<std::size_t>(i)] =
            std::clamp(static_cast<float>(1.0 + 4.0 * s), std::nextafter(1.0f, 2.0f), std::nextafter(5.0f, 4.0f));
      }
      m.last_mos = r.mos;
      m.ran_regression = true;
      break;
    }
    case HeadKind::kDcec: {
      if (!m.embedding) throw Error(errc::kInvalidArgument, "model has no dcec head");
      r.embedding = m.embedding->forward(flat_latent);
      m.ran_embedding = true;
      if (spec_.clustering) {
        const int d = r.embedding.dim(1);
        dcec::Matrix z(n, d), u(m.centers.dim(0), d);
        for (std::size_t i = 0; i < r.embedding.size(); ++i) z.data[i] = r.embedding[i];
        for (std::size_t i = 0; i < m.centers.size(); ++i) u.data[i] = m.centers[i];
        const auto q = dcec::soft_assign(z, u);
        r.soft_assign = Tensor({n, u.rows});
        for (std::size_t i = 0; i < q.data.size(); ++i) r.soft_assign[i] = static_cast<float>(q.data[i]);
      }
      break;
    }
  }
  return r;
}

ForwardResult Model::forward(const Tensor& x, Mode mode, std::uint64_t dropout_seed) {
  auto& m = *impl_;
  ForwardResult r;
  r.latent = encode(x, mode);
  if (m.classification) {
    auto c = head_forward(r.latent, HeadKind::kClassification, mode, dropout_seed);
    r.class_logits = std::move(c.class_logits);
    r.class_probs = std::move(c.class_probs);
  }
  if (m.regression) r.mos = head_forward(r.latent, HeadKind::kRegression, mode, dropout_seed).mos;
  if (m.embedding) {
    auto e = head_forward(r.latent, HeadKind::kDcec, mode, dropout_seed);
    r.embedding = std::move(e.embedding);
    r.soft_assign = std::move(e.soft_assign);
  }
  if (m.decoder_fc) {
    const auto ls = spec_.convnet.latent_shape();
    Tensor h = m.decoder_relu.forward(m.decoder_fc->forward(r.embedding));
    h.reshape({x.dim(0), ls[0], ls[1], ls[2]});
    for (auto& b : m.decoder) {
      h = b.deconv.forward(h);
      if (b.bn) h = b.relu.forward(b.bn->forward(h, mode));
    }
    r.reconstruction = std::move(h);
    m.ran_decoder = true;
  }
  return r;
}

void Model::backward(const OutputGrads& grads) {
  auto& m = *impl_;
  if (m.latent_shape.empty()) throw Error(errc::kInvalidArgument, "backward called before forward");
  const int n = m.latent_shape[0];
  const int flat = spec_.convnet.flat_size();
  Tensor d_flat({n, flat});
  bool any = false;
  const auto add = [&](const Tensor& g) {
    for (std::size_t i = 0; i < d_flat.size(); ++i) d_flat[i] += g[i];
    any = true;
  };

  if (!grads.class_logits.empty()) {
    if (!m.ran_classification) throw Error(errc::kInvalidArgument, "no classification forward to backpropagate");
    auto& h = *m.classification;
    add(h.fc1.backward(h.relu.backward(h.dropout.backward(h.fc2.backward(grads.class_logits)))));
  }
  if (!grads.mos.empty()) {
    if (!m.ran_regression) throw Error(errc::kInvalidArgument, "no regression forward to backpropagate");
    auto& h = *m.regression;
    Tensor dz({n, 1});
    for (int i = 0; i < n; ++i) {
      const double s = (m.last_mos[static_cast<std::size_t>(i)] - 1.0) / 4.0;
      dz[static_cast<std::size_t>(i)] = static_cast<float>(grads.mos[static_cast<std::size_t>(i)] * 4.0 * s * (1.0 - s));
    }
    add(h.fc1.backward(h.relu.backward(h.dropout.backward(h.fc2.backward(dz)))));
  }
  Tensor d_embedding;
  if (!grads.embedding.empty()) d_embedding = grads.embedding;
  if (!grads.reconstruction.empty()) {
    if (!m.ran_decoder) throw Error(errc::kInvalidArgument, "no decoder forward to backpropagate");
    Tensor g = grads.reconstruction;
    for (auto it = m.decoder.rbegin(); it != m.decoder.rend(); ++it) {
      if (it->bn) g = it->bn->backward(it->relu.backward(g));
      g = it->deconv.backward(g);
    }
    g.reshape({n, spec_.convnet.flat_size()});
    Tensor de = m.decoder_fc->backward(m.decoder_relu.backward(g));
    if (d_embedding.empty()) {
      d_embedding = std::move(de);
    } else {
      for (std::size_t i = 0; i < de.size(); ++i) d_embedding[i] += de[i];
    }
  }
  if (!d_embedding.empty()) {
    if (!m.ran_embedding) throw Error(errc::kInvalidArgument, "no embedding forward to backpropagate");
    add(m.embedding->backward(d_embedding));
  }
  if (!any) return;
  Tensor g = std::move(d_flat);
  g.reshape(m.latent_shape);
  for (auto it = m.encoder.rbegin(); it != m.encoder.rend(); ++it)
    g = it->conv.backward(it->bn.backward(it->relu.backward(g)));
}

std::vector<ParamRef> Model::parameters() {
  auto& m = *impl_;
  std::vector<ParamRef> out;
  for (std::size_t i = 0; i < m.encoder.size(); ++i) {
    const std::string p = "convnet." + std::to_string(i);
    m.encoder[i].conv.collect(out, p + ".conv");
    m.encoder[i].bn.collect(out, p + ".bn");
  }
  if (m.classification) {
    m.classification->fc1.collect(out, "classification.fc1");
    m.classification->fc2.collect(out, "classification.fc2");
  }
  if (m.regression) {
    m.regression->fc1.collect(out, "regression.fc1");
    m.regression->fc2.collect(out, "regression.fc2");
  }
  if (m.embedding) m.embedding->collect(out, "embedding.fc");
  if (!m.centers.empty()) out.push_back({"clustering.centers", &m.centers, &m.centers_grad});
  if (m.decoder_fc) {
    m.decoder_fc->collect(out, "decoder.fc");
    for (std::size_t i = 0; i < m.decoder.size(); ++i) {
      const std::string p = "decoder." + std::to_string(i);
      m.decoder[i].deconv.collect(out, p + ".deconv");
      if (m.decoder[i].bn) m.decoder[i].bn->collect(out, p + ".bn");
    }
  }
  return out;
}

std::vector<ParamRef> Model::trainable() {
  std::vector<ParamRef> out;
  for (auto& p : parameters())
    if (p.grad) out.push_back(p);
  return out;
}

std::size_t Model::parameter_count(std::string_view group) {
  std::size_t n = 0;
  for (auto& p : trainable())
    if (group_of(p.name) == group) n += p.value->size();
  return n;
}

void Model::zero_grad() {
  for (auto& p : trainable()) p.grad->fill(0.0f);
}

Tensor& Model::cluster_centers() {
  if (impl_->centers.empty()) throw Error(errc::kInvalidArgument, "model has no clustering layer");
  return impl_->centers;
}

Tensor& Model::cluster_centers_grad() {
  if (impl_->centers.empty()) throw Error(errc::kInvalidArgument, "model has no clustering layer");
  return impl_->centers_grad;
}

}  // namespace sqa::nn
