#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "sqa/corpus/manifest.hpp"

namespace sqa::corpus {

/// Speaker-disjoint cross-validation plan; fold k tests on
/// `test_speakers[k]` and trains on every other speaker.
struct SplitPlan {
  int fold_count = 0;
  std::vector<std::set<std::string>> test_speakers;

  int fold_of(const std::string& speaker_id) const;  // throws if unknown
  bool operator==(const SplitPlan&) const = default;
};

/// Sort speakers, shuffle with `seed`, deal round-robin into folds.
SplitPlan make_speaker_folds(const Manifest& manifest, int fold_count,
                             std::uint64_t seed);

struct FoldIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::set<std::string> train_speakers;
  std::set<std::string> test_speakers;
};

FoldIndices split_indices(const Manifest& manifest, const SplitPlan& plan, int fold);

/// Writes the fold column of every entry from the plan.
void tag_folds(Manifest& manifest, const SplitPlan& plan);

}  // namespace sqa::corpus
