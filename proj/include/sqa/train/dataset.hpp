#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sqa/corpus/manifest.hpp"
#include "sqa/nn/tensor.hpp"

namespace sqa::train {

/// Fixed-shape features plus per-clip annotations, in manifest order.
/// `labels` holds the auxiliary class target (degradation or cluster) and
/// `mos` the quality target; either may be empty.
struct Dataset {
  int bands = 0;
  int frames = 0;
  std::vector<float> features;  // size() * bands * frames
  std::vector<std::string> clip_ids;
  std::vector<std::string> speakers;
  std::vector<corpus::Degradation> degradations;
  std::vector<int> labels;
  std::string label_kind;  // "degradation", "cluster" or empty
  std::vector<double> mos;

  std::size_t size() const { return clip_ids.size(); }
  std::size_t feature_size() const { return static_cast<std::size_t>(bands) * frames; }

  /// (n, 1, bands, frames) batch of the given rows.
  nn::Tensor batch(std::span<const std::size_t> rows) const;
  Dataset subset(std::span<const std::size_t> rows) const;

  /// Labels from the degradation column (class_index order).
  void use_degradation_labels();

  /// FNV-1a over shapes, clip ids and feature bytes.
  std::uint64_t fingerprint() const;
  void validate() const;
};

/// Rows of one epoch in shuffled order, cut into batches; the last batch
/// may be short. The order depends only on (seed, epoch).
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch_size, std::uint64_t seed, int epoch);

/// Consecutive batches in natural order (inference).
std::vector<std::vector<std::size_t>> sequential_batches(std::size_t n, int batch_size);

}  // namespace sqa::train
