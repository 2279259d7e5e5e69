#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sqa/corpus/manifest.hpp"
#include "sqa/synth/degrade.hpp"

namespace sqa::synth {

/// Conditions per class. A class with an empty list is an error at synthesis.
struct ConditionGrid {
  std::map<Degradation, std::vector<DegradationCondition>> conditions;

  /// CHOP {20,40,80} ms x {0.1,0.2,0.4}; CLIP {0.1,0.2,0.4,0.6};
  /// ECHO {100,200,400} ms x {0.2,0.4,0.6}; NOISE {0..30 step 5} dB; REFERENCE.
  static ConditionGrid defaults();
  static ConditionGrid reference_only();
};

struct SynthesisOptions {
  /// Clips per class; 0 means one per clean clip.
  std::size_t per_class = 0;
  std::uint64_t seed = 0;
  /// Speakers reserved for the MOS-annotated set; any overlap is an error.
  std::set<std::string> excluded_speakers;
  /// Optional: write a pseudo-MOS for every row (demo corpora only).
  bool pseudo_mos = false;
  /// Classes to emit; empty means every class in the grid.
  std::vector<Degradation> classes;
};

/// Generates degraded WAVs under `output_dir/<CLASS>/` plus
/// `output_dir/manifest.csv` (paths relative to output_dir) and a
/// `synthesis_log.csv` recording per-clip seed and peak scale.
/// REFERENCE rows are byte-for-byte copies of the source files.
corpus::Manifest synthesize_corpus(const corpus::Manifest& clean_manifest,
                                   const std::filesystem::path& clean_manifest_path,
                                   const ConditionGrid& grid,
                                   const std::filesystem::path& output_dir,
                                   const SynthesisOptions& options);

/// Seed for one output clip: seed ^ fnv1a(clip_path), finalized.
std::uint64_t clip_seed(std::uint64_t seed, const std::string& clip_path);

}  // namespace sqa::synth
