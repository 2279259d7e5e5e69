#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sqa/nn/layers.hpp"
#include "sqa/nn/tensor.hpp"

namespace sqa::nn {

struct ConvLayerSpec {
  int kernels = 32;
  int kernel_size = 5;
  bool operator==(const ConvLayerSpec&) const = default;
};

/// The shared ConvNet: conv(stride 2, same) -> batch-norm -> ReLU per layer.
struct ConvNetSpec {
  int input_bands = 64;
  int input_frames = 798;
  int stride = 2;
  std::vector<ConvLayerSpec> layers{{32, 5}, {64, 5}, {128, 3}, {256, 3}};

  /// (channels, height, width) entering layer i; index layers.size() is the latent.
  std::array<int, 3> shape_at(std::size_t i) const;
  std::array<int, 3> latent_shape() const { return shape_at(layers.size()); }
  int flat_size() const;
  std::string descriptor() const;
  void validate() const;

  bool operator==(const ConvNetSpec&) const = default;
};

enum class HeadKind { kClassification, kRegression, kDcec };

std::string_view to_string(HeadKind kind);

/// classification: flatten -> FC(hidden) -> ReLU -> dropout -> FC(outputs) -> softmax
/// regression:     flatten -> FC(hidden) -> ReLU -> dropout -> FC(1) -> 1 + 4 sigmoid
/// dcec:           flatten -> FC(embedding_dim) -> clustering layer (outputs centers)
struct HeadSpec {
  HeadKind kind = HeadKind::kClassification;
  int hidden = 256;
  float dropout = 0.5f;
  int outputs = 5;
  int embedding_dim = 10;

  static HeadSpec classification(int classes = 5) { return {HeadKind::kClassification, 256, 0.5f, classes, 0}; }
  static HeadSpec regression() { return {HeadKind::kRegression, 256, 0.5f, 1, 0}; }
  static HeadSpec dcec(int clusters = 5, int embedding_dim = 10) { return {HeadKind::kDcec, 0, 0.0f, clusters, embedding_dim}; }

  std::string descriptor() const;
  bool operator==(const HeadSpec&) const = default;
};

/// Architecture descriptor. `decoder` mirrors the encoder from the dcec
/// embedding; `clustering` = false keeps the embedding but drops the centers
/// (the plain convolutional autoencoder).
struct ModelSpec {
  ConvNetSpec convnet;
  std::optional<HeadSpec> classification;
  std::optional<HeadSpec> regression;
  std::optional<HeadSpec> dcec;
  bool decoder = false;
  bool clustering = true;

  static ModelSpec autoencoder(ConvNetSpec convnet = {});
  static ModelSpec dcec_model(ConvNetSpec convnet = {});
  static ModelSpec classifier(ConvNetSpec convnet = {}, int classes = 5);
  static ModelSpec task(ConvNetSpec convnet, bool with_classification, bool with_regression, int classes = 5);

  std::string descriptor() const;
  std::uint64_t hash() const;
};

struct ForwardResult {
  Tensor latent;          // (N, C, H, W)
  Tensor class_logits;    // (N, classes)
  Tensor class_probs;     // (N, classes), rows sum to 1
  Tensor mos;             // (N, 1) in (1, 5)
  Tensor embedding;       // (N, embedding_dim)
  Tensor soft_assign;     // (N, clusters)
  Tensor reconstruction;  // same shape as the input
};

/// Loss gradients w.r.t. model outputs; empty tensors contribute nothing.
struct OutputGrads {
  Tensor class_logits;
  Tensor mos;
  Tensor embedding;
  Tensor reconstruction;
};

class Model {
 public:
  Model(ModelSpec spec, std::uint64_t init_seed);
  ~Model();
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;

  const ModelSpec& spec() const { return spec_; }

  /// x: (N, 1, bands, frames).
  ForwardResult forward(const Tensor& x, Mode mode, std::uint64_t dropout_seed = 0);
  /// Encoder only.
  Tensor encode(const Tensor& x, Mode mode);
  /// Runs one head on a latent produced by `encode`.
  ForwardResult head_forward(const Tensor& latent, HeadKind kind, Mode mode, std::uint64_t dropout_seed = 0);

  /// Backpropagates through the most recent `forward`, accumulating into
  /// parameter gradients.
  void backward(const OutputGrads& grads);
  void zero_grad();

  /// Parameters and buffers, named `<group>.<layer>.<param>`. Groups:
  /// convnet, classification, regression, embedding, clustering, decoder.
  std::vector<ParamRef> parameters();
  std::vector<ParamRef> trainable();
  std::size_t parameter_count(std::string_view group);

  Tensor& cluster_centers();
  Tensor& cluster_centers_grad();

 private:
  struct Impl;
  ModelSpec spec_;
  std::unique_ptr<Impl> impl_;
};

/// Group name of a parameter (prefix before the first '.').
std::string_view group_of(std::string_view param_name);

}  // namespace sqa::nn
