#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace sqa::corpus {

/// Mono waveform with provenance. Samples are nominally in [-1, 1]; the
/// generators keep them there and `write_wav` saturates anything outside.
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 16000;
  std::string speaker_id;
  std::string sentence_id;
  std::filesystem::path source_path;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// Throws if the clip is empty or has a non-positive rate.
void validate(const AudioClip& clip);

}  // namespace sqa::corpus
