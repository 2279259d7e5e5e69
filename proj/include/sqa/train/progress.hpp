#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "sqa/common/log.hpp"
#include "sqa/nn/adam.hpp"
#include "sqa/nn/model.hpp"

namespace sqa::train {

/// Knobs shared by every gradient-trained stage.
struct StageParams {
  int epochs = 200;
  double learning_rate = 1e-3;
  int batch_size = 64;
  std::uint64_t seed = 0;
  std::string config_hash;
  /// When set, progress is saved here after every epoch and a later run with
  /// the same stage, seed, config hash and architecture resumes from it.
  std::filesystem::path state_path;
  LogSink log;
};

/// Resume file for one stage: model + optimizer + caller state after the
/// last completed epoch. Every random draw in training is indexed by
/// (seed, epoch, step), so resuming replays the exact uninterrupted run.
class Progress {
 public:
  Progress(std::string stage, const StageParams& params) : stage_(std::move(stage)), params_(params) {}

  /// Restores model, optimizer and state if a matching file exists.
  /// Returns the number of completed epochs (0 when starting fresh).
  int resume(nn::Model& model, nn::Adam& adam, nlohmann::json& state) const;
  void save(nn::Model& model, const nn::Adam& adam, const nlohmann::json& state, int epochs_done) const;

 private:
  std::string stage_;
  const StageParams& params_;
};

/// `%.17g` so logged losses round-trip exactly.
std::string format_real(double v);

}  // namespace sqa::train
