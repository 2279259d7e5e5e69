#include "sqa/train/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "sqa/common/error.hpp"
#include "sqa/common/hash.hpp"
#include "sqa/common/rng.hpp"

namespace sqa::train {

nn::Tensor Dataset::batch(std::span<const std::size_t> rows) const {
  nn::Tensor t({static_cast<int>(rows.size()), 1, bands, frames});
  const std::size_t fs = feature_size();
  for (std::size_t b = 0; b < rows.size(); ++b) {
    if (rows[b] >= size()) throw Error(errc::kInvalidArgument, "batch row out of range");
    std::memcpy(t.data() + b * fs, features.data() + rows[b] * fs, fs * sizeof(float));
  }
  return t;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset d;
  d.bands = bands;
  d.frames = frames;
  d.label_kind = label_kind;
  const std::size_t fs = feature_size();
  d.features.reserve(rows.size() * fs);
  for (std::size_t r : rows) {
    if (r >= size()) throw Error(errc::kInvalidArgument, "subset row out of range");
    d.features.insert(d.features.end(), features.begin() + static_cast<std::ptrdiff_t>(r * fs),
                      features.begin() + static_cast<std::ptrdiff_t>((r + 1) * fs));
    d.clip_ids.push_back(clip_ids[r]);
    if (!speakers.empty()) d.speakers.push_back(speakers[r]);
    if (!degradations.empty()) d.degradations.push_back(degradations[r]);
    if (!labels.empty()) d.labels.push_back(labels[r]);
    if (!mos.empty()) d.mos.push_back(mos[r]);
  }
  return d;
}

void Dataset::use_degradation_labels() {
  if (degradations.size() != size()) throw Error(errc::kInvalidArgument, "dataset has no degradation column");
  labels.clear();
  label_kind = "degradation";
  for (auto d : degradations) labels.push_back(corpus::class_index(d));
}

std::uint64_t Dataset::fingerprint() const {
  std::uint64_t h = fnv1a64(std::to_string(bands) + "x" + std::to_string(frames));
  for (const auto& id : clip_ids) h = mix64(h ^ fnv1a64(id));
  return mix64(h ^ fnv1a64_bytes(std::as_bytes(std::span(features))));
}

void Dataset::validate() const {
  const auto n = size();
  if (features.size() != n * feature_size()) throw Error(errc::kShape, "dataset feature buffer has the wrong size");
  const auto check = [&](std::size_t got, const char* what) {
    if (got != 0 && got != n) throw Error(errc::kShape, std::string("dataset column '") + what + "' has the wrong length");
  };
  check(speakers.size(), "speaker");
  check(degradations.size(), "degradation");
  check(labels.size(), "label");
  check(mos.size(), "mos");
  for (float v : features)
    if (!std::isfinite(v)) throw Error(errc::kNumeric, "dataset contains non-finite features");
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch_size, std::uint64_t seed, int epoch) {
  if (batch_size < 1) throw Error(errc::kInvalidArgument, "batch size must be positive");
  Rng rng(derive_seed(seed, "epoch-order", static_cast<std::uint64_t>(epoch)));
  const auto order = permutation(n, rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(batch_size))
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + static_cast<std::size_t>(batch_size))));
  return out;
}

std::vector<std::vector<std::size_t>> sequential_batches(std::size_t n, int batch_size) {
  if (batch_size < 1) throw Error(errc::kInvalidArgument, "batch size must be positive");
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(batch_size)) {
    out.emplace_back();
    for (std::size_t j = i; j < std::min(n, i + static_cast<std::size_t>(batch_size)); ++j) out.back().push_back(j);
  }
  return out;
}

}  // namespace sqa::train
