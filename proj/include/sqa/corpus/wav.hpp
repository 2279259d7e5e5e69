#pragma once

#include <filesystem>

#include "sqa/corpus/audio_clip.hpp"

namespace sqa::corpus {

/// Reads a RIFF/WAVE file holding mono 16-bit linear PCM.
AudioClip read_wav(const std::filesystem::path& path);

/// Writes mono 16-bit PCM. Samples outside [-1, 1] are saturated and a
/// warning is emitted. Returns the number of saturated samples.
std::size_t write_wav(const AudioClip& clip, const std::filesystem::path& path);

}  // namespace sqa::corpus
