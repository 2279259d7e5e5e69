#include "sqa/corpus/folds.hpp"

#include "sqa/common/error.hpp"
#include "sqa/common/rng.hpp"

namespace sqa::corpus {

int SplitPlan::fold_of(const std::string& speaker_id) const {
  for (int k = 0; k < fold_count; ++k)
    if (test_speakers[static_cast<std::size_t>(k)].count(speaker_id)) return k;
  throw Error(errc::kInvalidArgument, "speaker '" + speaker_id + "' is not in the split plan");
}

SplitPlan make_speaker_folds(const Manifest& manifest, int fold_count, std::uint64_t seed) {
  if (fold_count < 1) throw Error(errc::kInvalidArgument, "fold_count must be positive");
  std::vector<std::string> speakers = manifest.speakers();
  if (static_cast<int>(speakers.size()) < fold_count)
    throw Error(errc::kInvalidArgument, "cannot build " + std::to_string(fold_count) + " folds from " +
                                            std::to_string(speakers.size()) + " speakers");
  Rng rng(derive_seed(seed, "speaker-folds"));
  shuffle_in_place(speakers, rng);
  SplitPlan plan;
  plan.fold_count = fold_count;
  plan.test_speakers.resize(static_cast<std::size_t>(fold_count));
  for (std::size_t i = 0; i < speakers.size(); ++i)
    plan.test_speakers[i % static_cast<std::size_t>(fold_count)].insert(speakers[i]);
  return plan;
}

FoldIndices split_indices(const Manifest& manifest, const SplitPlan& plan, int fold) {
  if (fold < 0 || fold >= plan.fold_count) throw Error(errc::kInvalidArgument, "fold index out of range");
  FoldIndices out;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& spk = manifest.entries[i].speaker_id;
    if (plan.fold_of(spk) == fold) {
      out.test.push_back(i);
      out.test_speakers.insert(spk);
    } else {
      out.train.push_back(i);
      out.train_speakers.insert(spk);
    }
  }
  return out;
}

void tag_folds(Manifest& manifest, const SplitPlan& plan) {
  for (auto& e : manifest.entries) e.fold = plan.fold_of(e.speaker_id);
}

}  // namespace sqa::corpus
