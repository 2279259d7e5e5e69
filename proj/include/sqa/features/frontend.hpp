#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sqa/corpus/audio_clip.hpp"

namespace sqa::features {

using corpus::AudioClip;

/// Analysis parameters. Defaults: 16 kHz, 64 HTK mel bands over 0-8 kHz,
/// 25 ms periodic-Hann window, 10 ms hop, 512-point FFT, log floor 1e-10,
/// 798 fixed frames.
struct FrontendConfig {
  int sample_rate = 16000;
  int mel_bands = 64;
  int window = 400;
  int hop = 160;
  int fft_size = 512;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-10;
  int fixed_frames = 798;

  /// Canonical `k=v;...` rendering; part of the feature-cache key.
  std::string describe() const;
};

/// (bands x frames) row-major log-mel matrix.
struct LogMelFeature {
  int bands = 0;
  int frames = 0;
  std::vector<float> values;
  std::string clip_ref;

  float at(int band, int frame) const {
    return values[static_cast<std::size_t>(band) * frames + frame];
  }
  float& at(int band, int frame) { return values[static_cast<std::size_t>(band) * frames + frame]; }
};

/// Band-limited rational resampling to 16 kHz (Kaiser-windowed sinc, ~80 dB
/// stopband, cutoff 7.2 kHz). 16 kHz input is returned unchanged; lower
/// rates are rejected rather than upsampled.
AudioClip resample_to_16k(const AudioClip& clip);
AudioClip resample(const AudioClip& clip, int target_rate);

/// Number of STFT frames without padding: floor((N - window) / hop) + 1.
int frame_count(std::size_t samples, const FrontendConfig& cfg);

/// Triangular HTK-mel weights, (bands x (fft_size/2+1)) row-major.
std::vector<double> mel_filterbank(const FrontendConfig& cfg);
double hz_to_mel(double hz);
double mel_to_hz(double mel);

class LogMelExtractor {
 public:
  explicit LogMelExtractor(FrontendConfig cfg = {});
  ~LogMelExtractor();
  LogMelExtractor(const LogMelExtractor&) = delete;
  LogMelExtractor& operator=(const LogMelExtractor&) = delete;

  /// Raw (unpadded) log-mel. Requires cfg.sample_rate input and at least one
  /// full window of samples.
  LogMelFeature compute(const AudioClip& clip) const;

  const FrontendConfig& config() const { return cfg_; }
  std::span<const double> filterbank() const { return filters_; }

 private:
  struct Plan;
  FrontendConfig cfg_;
  std::vector<double> window_;
  std::vector<double> filters_;
  std::unique_ptr<Plan> plan_;
};

/// Center-crop or reflect-pad along time to exactly `frames` frames.
LogMelFeature fix_length(const LogMelFeature& feature, int frames);

/// Per-band affine statistics. `provenance` names the folds/splits the
/// statistics were computed on.
struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<std::string> provenance;
};

inline constexpr double kStdFloor = 1e-6;

NormalizationStats compute_stats(std::span<const LogMelFeature> training,
                                 std::vector<std::string> provenance);
void apply_stats(LogMelFeature& feature, const NormalizationStats& stats);

/// Throws sqa::Error(kLeakage) if the stats provenance names any test split.
void assert_no_leakage(const NormalizationStats& stats, std::span<const std::string> test_tags);

/// Full per-clip pipeline: resample, log-mel, fix length.
LogMelFeature extract(const LogMelExtractor& extractor, const AudioClip& clip);

}  // namespace sqa::features
