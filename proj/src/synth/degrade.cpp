#include "sqa/synth/degrade.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "sqa/common/error.hpp"
#include "sqa/common/rng.hpp"

namespace sqa::synth {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::size_t ms_to_samples(double ms, int rate) {
  return static_cast<std::size_t>(std::llround(ms * rate / 1000.0));
}

}  // namespace

double mean_square(std::span<const float> x) {
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return x.empty() ? 0.0 : acc / static_cast<double>(x.size());
}

Degradation DegradationCondition::degradation() const {
  return std::visit(overloaded{[](const ChopParams&) { return Degradation::kChop; },
                               [](const ClipParams&) { return Degradation::kClip; },
                               [](const EchoParams&) { return Degradation::kEcho; },
                               [](const NoiseParams&) { return Degradation::kNoise; },
                               [](const ReferenceParams&) { return Degradation::kReference; }},
                    params);
}

std::string DegradationCondition::id() const {
  return std::visit(
      overloaded{
          [](const ChopParams& p) { return "CHOP_period=" + num(p.period_ms) + "_fraction=" + num(p.chopped_fraction); },
          [](const ClipParams& p) { return "CLIP_threshold=" + num(p.threshold); },
          [](const EchoParams& p) { return "ECHO_delay=" + num(p.delay_ms) + "_alpha=" + num(p.alpha); },
          [](const NoiseParams& p) {
            return "NOISE_snr=" + num(p.snr_db) + "_kind=" + (p.kind == NoiseKind::kWhite ? "white" : "pink");
          },
          [](const ReferenceParams&) { return std::string("REFERENCE"); }},
      params);
}

void DegradationCondition::validate() const {
  const auto bad = [this](const char* why) { throw Error(errc::kInvalidArgument, id() + ": " + why); };
  std::visit(overloaded{[&](const ChopParams& p) {
                          if (!(p.period_ms > 0)) bad("period_ms must be positive");
                          if (!(p.chopped_fraction > 0 && p.chopped_fraction < 1)) bad("chopped_fraction must lie in (0, 1)");
                        },
                        [&](const ClipParams& p) {
                          if (!(p.threshold > 0 && p.threshold <= 1)) bad("threshold must lie in (0, 1]");
                        },
                        [&](const EchoParams& p) {
                          if (!(p.delay_ms > 0)) bad("delay_ms must be positive");
                          if (!(p.alpha >= 0 && p.alpha < 1)) bad("alpha must lie in [0, 1)");
                        },
                        [&](const NoiseParams& p) {
                          if (std::isnan(p.snr_db)) bad("snr_db is NaN");
                        },
                        [](const ReferenceParams&) {}},
             params);
}

AudioClip apply_clip(const AudioClip& clip, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw Error(errc::kInvalidArgument, "clip threshold must lie in (0, 1]");
  AudioClip out = clip;
  const float t = static_cast<float>(threshold);
  for (float& s : out.samples) s = std::clamp(s, -t, t);
  return out;
}

AudioClip apply_chop_samples(const AudioClip& clip, std::size_t period, double chopped_fraction) {
  if (!(chopped_fraction > 0.0 && chopped_fraction < 1.0))
    throw Error(errc::kInvalidArgument, "chopped_fraction must lie in (0, 1)");
  if (period == 0 || period > clip.samples.size())
    throw Error(errc::kInvalidArgument, "chop period must be between 1 sample and the clip length");
  const auto zeroed = static_cast<std::size_t>(std::llround(chopped_fraction * static_cast<double>(period)));
  const std::size_t keep = period - zeroed;
  AudioClip out = clip;
  for (std::size_t i = 0; i < out.samples.size(); ++i)
    if (i % period >= keep) out.samples[i] = 0.0f;
  return out;
}

AudioClip apply_chop(const AudioClip& clip, double period_ms, double chopped_fraction) {
  if (!(period_ms > 0.0)) throw Error(errc::kInvalidArgument, "chop period must be positive");
  return apply_chop_samples(clip, ms_to_samples(period_ms, clip.sample_rate), chopped_fraction);
}

AudioClip apply_echo(const AudioClip& clip, double delay_ms, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw Error(errc::kInvalidArgument, "echo alpha must lie in [0, 1)");
  if (!(delay_ms > 0.0)) throw Error(errc::kInvalidArgument, "echo delay must be positive");
  const std::size_t d = ms_to_samples(delay_ms, clip.sample_rate);
  if (d == 0 || d >= clip.samples.size())
    throw Error(errc::kInvalidArgument, "echo delay is longer than the clip");
  AudioClip out = clip;
  const double norm = 1.0 + alpha;
  for (std::size_t n = 0; n < out.samples.size(); ++n) {
    const double delayed = n >= d ? clip.samples[n - d] : 0.0;
    out.samples[n] = static_cast<float>((clip.samples[n] + alpha * delayed) / norm);
  }
  return out;
}

std::vector<float> make_noise(std::size_t n, NoiseKind kind, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<float> w(n);
  if (kind == NoiseKind::kWhite) {
    for (auto& v : w) v = static_cast<float>(gauss(rng));
    return w;
  }
  // Paul Kellet's refined pink filter (-3 dB/octave above ~10 Hz at 44.1 kHz;
  // close enough at 16 kHz for a background-noise stand-in).
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  std::vector<double> tmp(n);
  for (auto& v : tmp) {
    const double white = gauss(rng);
    b0 = 0.99886 * b0 + white * 0.0555179;
    b1 = 0.99332 * b1 + white * 0.0750759;
    b2 = 0.96900 * b2 + white * 0.1538520;
    b3 = 0.86650 * b3 + white * 0.3104856;
    b4 = 0.55000 * b4 + white * 0.5329522;
    b5 = -0.7616 * b5 - white * 0.0168980;
    v = b0 + b1 + b2 + b3 + b4 + b5 + b6 + white * 0.5362;
    b6 = white * 0.115926;
  }
  double power = 0;
  for (double v : tmp) power += v * v;
  const double scale = power > 0 ? 1.0 / std::sqrt(power / static_cast<double>(n)) : 1.0;
  for (std::size_t i = 0; i < n; ++i) w[i] = static_cast<float>(tmp[i] * scale);
  return w;
}

NoisyClip apply_noise(const AudioClip& clip, double snr_db, NoiseKind kind, std::uint64_t seed) {
  NoisyClip out{clip, 0.0, 1.0};
  if (std::isinf(snr_db) && snr_db > 0) return out;
  if (std::isnan(snr_db)) throw Error(errc::kInvalidArgument, "snr_db is NaN");
  const double px = mean_square(clip.samples);
  if (!(px > 0.0)) throw Error(errc::kInvalidArgument, "cannot set an SNR on a silent clip");
  const std::vector<float> w = make_noise(clip.samples.size(), kind, seed);
  const double pw = mean_square(w);
  const double g = std::sqrt(px / (pw * std::pow(10.0, snr_db / 10.0)));
  out.noise_gain = g;
  std::vector<double> mix(clip.samples.size());
  double peak = 0.0;
  for (std::size_t i = 0; i < mix.size(); ++i) {
    mix[i] = clip.samples[i] + g * w[i];
    peak = std::max(peak, std::abs(mix[i]));
  }
  if (peak > 1.0) out.peak_scale = 1.0 / peak;
  for (std::size_t i = 0; i < mix.size(); ++i)
    out.clip.samples[i] = static_cast<float>(mix[i] * out.peak_scale);
  return out;
}

DegradedClip apply(const AudioClip& clip, const DegradationCondition& condition, std::uint64_t seed) {
  condition.validate();
  return std::visit(
      overloaded{[&](const ChopParams& p) { return DegradedClip{apply_chop(clip, p.period_ms, p.chopped_fraction)}; },
                 [&](const ClipParams& p) { return DegradedClip{apply_clip(clip, p.threshold)}; },
                 [&](const EchoParams& p) { return DegradedClip{apply_echo(clip, p.delay_ms, p.alpha)}; },
                 [&](const NoiseParams& p) {
                   auto n = apply_noise(clip, p.snr_db, p.kind, seed);
                   return DegradedClip{std::move(n.clip), n.peak_scale};
                 },
                 [&](const ReferenceParams&) { return DegradedClip{clip}; }},
      condition.params);
}

double severity(const DegradationCondition& condition) {
  return std::visit(overloaded{[](const ChopParams& p) { return std::min(1.0, p.chopped_fraction / 0.5); },
                               [](const ClipParams& p) { return 1.0 - p.threshold; },
                               [](const EchoParams& p) { return p.alpha; },
                               [](const NoiseParams& p) {
                                 if (std::isinf(p.snr_db)) return 0.0;
                                 return std::clamp((40.0 - p.snr_db) / 40.0, 0.0, 1.0);
                               },
                               [](const ReferenceParams&) { return 0.0; }},
                    condition.params);
}

double pseudo_mos(const DegradationCondition& condition) { return 4.5 - 3.4 * severity(condition); }

}  // namespace sqa::synth
