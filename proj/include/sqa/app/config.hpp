#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sqa/dcec/trainer.hpp"
#include "sqa/features/frontend.hpp"
#include "sqa/nn/model.hpp"
#include "sqa/synth/corpus_synth.hpp"

namespace sqa::app {

struct StageConfig {
  int epochs = 200;
  double learning_rate = 1e-3;
  int batch_size = 64;
};

/// Everything that determines an experiment's outputs. Loaded from JSON;
/// absent keys keep their defaults.
struct ExperimentConfig {
  // Clean speech for the large corpus (manifest of REFERENCE rows).
  std::filesystem::path clean_manifest;
  // MOS-annotated small corpus. When empty, a pseudo-MOS corpus is
  // synthesized from `small_clean_manifest` instead.
  std::filesystem::path small_manifest;
  std::filesystem::path small_clean_manifest;
  std::size_t small_per_class = 0;
  std::filesystem::path workdir = "sqa-work";

  synth::ConditionGrid grid = synth::ConditionGrid::defaults();
  std::size_t large_per_class = 761;

  features::FrontendConfig frontend;
  nn::ConvNetSpec convnet;
  dcec::DcecConfig dcec;

  StageConfig autoencoder{200, 1e-3, 64};
  StageConfig classifier{200, 1e-3, 64};
  StageConfig dcec_training{500, 1e-3, 64};
  StageConfig finetune{40, 1e-5, 64};

  int folds = 4;
  std::uint64_t seed = 0;

  /// Reject out-of-range values before any work starts.
  void validate() const;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);

  /// Hash over every field that affects results. Input manifests count by
  /// content, not location; the work directory is excluded.
  std::string hash() const;

  /// Every effective value with its source tag, one per line.
  std::string describe() const;
};

nlohmann::json grid_to_json(const synth::ConditionGrid& grid);
synth::ConditionGrid grid_from_json(const nlohmann::json& j);

}  // namespace sqa::app
