#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sqa/corpus/audio_clip.hpp"
#include "sqa/corpus/manifest.hpp"

namespace sqa::synth {

/// Per-speaker source/filter settings for the speech surrogate.
struct Voice {
  double f0 = 120.0;          // Hz
  double formant_scale = 1.0; // vocal-tract length factor
  double syllable_rate = 4.0; // Hz
};

Voice voice_for(const std::string& speaker_id);

/// Speech-like test signal: alternating voiced syllables (harmonic source
/// through three formant resonators with drifting formants), fricative
/// noise bursts and pauses. Peak level 0.7. Deterministic in `seed`.
corpus::AudioClip speech_surrogate(double seconds, int sample_rate, const Voice& voice, std::uint64_t seed);

/// Writes `clips_per_speaker` surrogate clips per speaker under `dir` and
/// returns (and writes) a REFERENCE manifest of them.
corpus::Manifest make_clean_corpus(const std::filesystem::path& dir, const std::vector<std::string>& speakers,
                                   int clips_per_speaker, double seconds, std::uint64_t seed);

}  // namespace sqa::synth
