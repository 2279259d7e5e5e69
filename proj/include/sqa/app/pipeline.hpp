#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sqa/app/config.hpp"
#include "sqa/common/log.hpp"
#include "sqa/corpus/folds.hpp"
#include "sqa/eval/report.hpp"
#include "sqa/features/frontend.hpp"
#include "sqa/nn/checkpoint.hpp"
#include "sqa/train/dataset.hpp"
#include "sqa/train/recipe.hpp"

namespace sqa::app {

enum class PretrainStage { kAutoencoder, kDcec, kClassifier };

PretrainStage parse_pretrain_stage(std::string_view name);
std::string_view checkpoint_stage(PretrainStage s);

/// `<workdir>/<config hash>/` with corpus/, features/, checkpoints/,
/// reports/ and logs/ underneath.
struct Workspace {
  std::filesystem::path root;

  std::filesystem::path corpus() const { return root / "corpus"; }
  std::filesystem::path features() const { return root / "features"; }
  std::filesystem::path checkpoints() const { return root / "checkpoints"; }
  std::filesystem::path reports() const { return root / "reports"; }
  std::filesystem::path logs() const { return root / "logs"; }

  std::filesystem::path large_manifest() const { return corpus() / "large" / "manifest.csv"; }
  std::filesystem::path small_manifest_copy() const { return corpus() / "small" / "manifest.csv"; }
  std::filesystem::path cluster_labels() const { return corpus() / "small" / "cluster_labels.csv"; }
  std::filesystem::path checkpoint(std::string_view stage) const;
};

/// Work directory root: $SQA_WORKDIR if set, otherwise the config's.
std::filesystem::path resolve_workdir(const ExperimentConfig& cfg);

/// Runs the experiment stages. Every stage reuses outputs already present
/// under the config-hash directory, so reruns are cheap and repeatable.
class Pipeline {
 public:
  explicit Pipeline(ExperimentConfig cfg, LogSink progress = {});

  const ExperimentConfig& config() const { return cfg_; }
  const Workspace& workspace() const { return ws_; }

  void synth();
  void features();
  nn::Checkpoint pretrain(PretrainStage stage);
  /// All folds of one variant; returns that variant's test predictions.
  std::vector<eval::Prediction> finetune(train::Variant variant);
  eval::MetricsReport evaluate(const std::vector<train::Variant>& variants);
  /// Rebuilds the report from stored predictions only.
  eval::MetricsReport report();

  corpus::SplitPlan split_plan();
  std::vector<int> cluster_labels();

 private:
  struct Corpus {
    corpus::Manifest manifest;
    std::filesystem::path manifest_path;
    std::vector<features::LogMelFeature> features;
  };

  const Corpus& large();
  const Corpus& small();
  Corpus load_corpus(const std::filesystem::path& manifest_path, const std::string& tag);
  features::NormalizationStats large_stats();
  train::Dataset pack(const Corpus& c, const features::NormalizationStats& stats, std::span<const std::size_t> rows) const;
  std::vector<std::size_t> all_rows(const Corpus& c) const;
  std::filesystem::path small_manifest_path() const;
  nn::Checkpoint require_checkpoint(std::string_view stage);
  LogSink stage_log(const std::string& name, bool append);
  void write_report(const eval::MetricsReport& r);

  ExperimentConfig cfg_;
  std::string hash_;
  Workspace ws_;
  LogSink progress_;
  std::optional<Corpus> large_, small_;
  std::optional<features::NormalizationStats> large_stats_;
};

}  // namespace sqa::app
