#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sqa/corpus/folds.hpp"
#include "sqa/corpus/manifest.hpp"
#include "sqa/train/dataset.hpp"
#include "sqa/train/recipe.hpp"

namespace sqa::eval {

/// Metrics of one slice. An undefined correlation leaves `error` set and the
/// numbers NaN; it never turns into a zero.
struct Cell {
  std::size_t n = 0;
  double rmse = 0.0;
  double pcc = 0.0;
  double srcc = 0.0;
  std::string error;

  bool ok() const { return error.empty(); }
};

Cell slice_metrics(std::span<const double> pred, std::span<const double> mos);

inline constexpr int kMeanFold = -1;

struct Record {
  std::string variant;
  int fold = kMeanFold;
  std::string slice;  // CHOP, CLIP, ECHO, NOISE or ALL
  Cell cell;
};

struct Prediction {
  std::string variant;
  int fold = 0;
  std::string clip_id;
  std::string speaker;
  corpus::Degradation degradation = corpus::Degradation::kReference;
  double mos = 0.0;
  double pred = 0.0;
};

struct ReportMetadata {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string dataset_fingerprint;
  int folds = 0;
};

/// Per-fold metrics per degradation slice and ALL (every test clip of the
/// fold pooled), then arithmetic means over folds.
struct MetricsReport {
  ReportMetadata meta;
  std::vector<std::string> variants;
  std::vector<Prediction> predictions;
  std::vector<Record> per_fold;
  std::vector<Record> averaged;

  /// Deterministic reduce; the only path that computes metrics.
  static MetricsReport from_predictions(ReportMetadata meta, std::vector<std::string> variants,
                                        std::vector<Prediction> predictions);

  const Record& find(const std::string& variant, const std::string& slice, int fold = kMeanFold) const;

  /// One `key=value` line per record, metadata first.
  std::string structured() const;
  /// RMSE, PCC and SRCC blocks; rows are variants, columns CHOP..ALL.
  std::string table() const;
  std::string predictions_csv() const;
};

std::vector<Prediction> parse_predictions_csv(const std::string& text);

/// Trains on `train`, returns one prediction per row of `test`.
using Predictor = std::function<std::vector<double>(train::Variant variant, int fold, const train::Dataset& train,
                                                    const train::Dataset& test)>;

/// Throws sqa::Error(kLeakage) if any speaker is on both sides.
void assert_speaker_disjoint(const train::Dataset& train, const train::Dataset& test, int fold);

/// Every variant x fold: split by the plan's test speakers, predict, score.
MetricsReport run_protocol(const std::vector<train::Variant>& variants, const train::Dataset& data,
                           const corpus::SplitPlan& plan, const Predictor& predictor, ReportMetadata meta);

}  // namespace sqa::eval
