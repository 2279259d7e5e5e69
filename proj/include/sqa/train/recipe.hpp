#pragma once

#include <array>
#include <string>
#include <string_view>

namespace sqa::train {

enum class Variant {
  kSingleTaskBaseline,
  kMultiTaskBaseline,
  kDegrSingleTask,
  kAeMultiTask,
  kAeSingleTask,
  kDcecMultiTask,
  kDcecSingleTask,
  kMtl,
  kSemtl,
};

inline constexpr std::array<Variant, 9> kAllVariants = {
    Variant::kSingleTaskBaseline, Variant::kMultiTaskBaseline, Variant::kDegrSingleTask,
    Variant::kAeMultiTask,        Variant::kAeSingleTask,      Variant::kDcecMultiTask,
    Variant::kDcecSingleTask,     Variant::kMtl,               Variant::kSemtl};

enum class InitFrom { kRandom, kDegradationClassifier, kAutoencoder, kDcec };
enum class AuxLabels { kNone, kDegradation, kCluster };

std::string_view to_string(Variant v);
std::string_view to_string(InitFrom i);
std::string_view to_string(AuxLabels a);

/// Throws sqa::Error(kInvalidArgument) listing the valid names.
Variant parse_variant(std::string_view name);
std::string variant_names();

/// Checkpoint stage tag a transfer variant starts from; empty for kRandom.
std::string_view stage_tag(InitFrom i);

struct TrainingRecipe {
  Variant variant = Variant::kSingleTaskBaseline;
  InitFrom init_from = InitFrom::kRandom;
  AuxLabels aux = AuxLabels::kNone;
  int epochs = 40;
  double learning_rate = 1e-5;
  int batch_size = 64;

  bool multi_task() const { return aux != AuxLabels::kNone; }

  /// The canonical pairing of initialization and auxiliary task per variant.
  static TrainingRecipe for_variant(Variant v);

  /// Throws sqa::Error(kConfig) if init/aux do not match the variant.
  void validate() const;
};

}  // namespace sqa::train
