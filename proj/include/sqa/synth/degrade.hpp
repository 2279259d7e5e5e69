#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <variant>

#include "sqa/corpus/audio_clip.hpp"
#include "sqa/corpus/manifest.hpp"

namespace sqa::synth {

using corpus::AudioClip;
using corpus::Degradation;

enum class NoiseKind { kWhite, kPink };

struct ChopParams {
  double period_ms = 20.0;
  double chopped_fraction = 0.1;  // (0, 1)
};
struct ClipParams {
  double threshold = 0.5;  // (0, 1]
};
struct EchoParams {
  double delay_ms = 100.0;  // > 0
  double alpha = 0.4;       // [0, 1)
};
struct NoiseParams {
  /// +infinity disables the noise.
  double snr_db = 10.0;
  NoiseKind kind = NoiseKind::kWhite;
};
struct ReferenceParams {};

using ConditionParams = std::variant<ChopParams, ClipParams, EchoParams, NoiseParams, ReferenceParams>;

/// One cell of the degradation grid. `id()` renders `<CLASS>_<k=v>_...`.
struct DegradationCondition {
  ConditionParams params;

  Degradation degradation() const;
  std::string id() const;
  void validate() const;  // throws on out-of-range parameters
};

inline constexpr double kNoiseDisabled = std::numeric_limits<double>::infinity();

AudioClip apply_clip(const AudioClip& clip, double threshold);

/// Zeroes the final `chopped_fraction` of every period. The number of zeroed
/// samples per period is round(fraction * period_samples).
AudioClip apply_chop(const AudioClip& clip, double period_ms, double chopped_fraction);
AudioClip apply_chop_samples(const AudioClip& clip, std::size_t period_samples, double chopped_fraction);

/// Single reflection, normalized by (1 + alpha) so the output never overloads.
AudioClip apply_echo(const AudioClip& clip, double delay_ms, double alpha);

struct NoisyClip {
  AudioClip clip;
  double noise_gain = 0.0;  // g applied to the unit noise draw
  double peak_scale = 1.0;  // < 1 when the mixture had to be peak-normalized
};

/// x + g*w with g chosen so that mean(x^2) / mean((g*w)^2) hits `snr_db`
/// exactly; the mixture is peak-normalized only if it leaves [-1, 1].
NoisyClip apply_noise(const AudioClip& clip, double snr_db, NoiseKind kind, std::uint64_t seed);

/// Unit-variance noise draw of length `n`.
std::vector<float> make_noise(std::size_t n, NoiseKind kind, std::uint64_t seed);

struct DegradedClip {
  AudioClip clip;
  double peak_scale = 1.0;
};

DegradedClip apply(const AudioClip& clip, const DegradationCondition& condition, std::uint64_t seed);

/// Documented pseudo-MOS used by the synthetic demo corpus: a monotone
/// decreasing function of per-class severity in [0, 1], mapped to
/// 4.5 - 3.4 * severity. REFERENCE has severity 0.
double severity(const DegradationCondition& condition);
double pseudo_mos(const DegradationCondition& condition);

double mean_square(std::span<const float> x);

}  // namespace sqa::synth
