#include "sqa/synth/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "sqa/common/error.hpp"
#include "sqa/common/rng.hpp"
#include "sqa/corpus/wav.hpp"

namespace sqa::synth {
namespace {

/// Two-pole resonator, unity-ish peak gain.
struct Resonator {
  double a1 = 0, a2 = 0, g = 0, y1 = 0, y2 = 0;

  void tune(double freq, double bandwidth, double sr) {
    const double r = std::exp(-std::numbers::pi * bandwidth / sr);
    a1 = 2.0 * r * std::cos(2.0 * std::numbers::pi * freq / sr);
    a2 = -r * r;
    g = 1.0 - r;
  }
  double step(double x) {
    const double y = g * x + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

}  // namespace

Voice voice_for(const std::string& speaker_id) {
  const auto h = mix64(fnv1a64(speaker_id));
  const auto unit = [&](int shift) { return static_cast<double>((h >> shift) & 0xffff) / 65535.0; };
  return {90.0 + 140.0 * unit(0), 0.85 + 0.3 * unit(16), 3.0 + 2.5 * unit(32)};
}

corpus::AudioClip speech_surrogate(double seconds, int sample_rate, const Voice& voice, std::uint64_t seed) {
  if (!(seconds > 0) || sample_rate <= 0) throw Error(errc::kInvalidArgument, "surrogate needs positive duration and rate");
  const auto n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  const double sr = sample_rate;
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  corpus::AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.assign(n, 0.0f);
  std::vector<double> y(n, 0.0);

  Resonator f1, f2, f3, fric;
  double phase = 0.0;
  std::size_t pos = 0;
  while (pos < n) {
    // One segment: voiced syllable (most of the time), fricative or pause.
    const double kind = u(rng);
    const auto len = static_cast<std::size_t>(sr / voice.syllable_rate * (0.6 + 0.8 * u(rng)));
    const std::size_t end = std::min(n, pos + std::max<std::size_t>(len, 16));
    const double seg = static_cast<double>(end - pos);
    if (kind < 0.7) {
      const double v1 = (300.0 + 500.0 * u(rng)) * voice.formant_scale;
      const double v2 = (900.0 + 1400.0 * u(rng)) * voice.formant_scale;
      const double w1 = (300.0 + 500.0 * u(rng)) * voice.formant_scale;
      const double w2 = (900.0 + 1400.0 * u(rng)) * voice.formant_scale;
      const double f0 = voice.f0 * (0.85 + 0.3 * u(rng));
      for (std::size_t i = pos; i < end; ++i) {
        const double t = static_cast<double>(i - pos) / seg;
        if ((i - pos) % 32 == 0) {
          f1.tune(v1 + (w1 - v1) * t, 80.0, sr);
          f2.tune(v2 + (w2 - v2) * t, 120.0, sr);
          f3.tune(2600.0 * voice.formant_scale, 200.0, sr);
        }
        const double inst = f0 * (1.0 + 0.08 * std::sin(std::numbers::pi * t) - 0.05 * t);
        phase += inst / sr;
        phase -= std::floor(phase);
        const double source = (2.0 * phase - 1.0) + 0.02 * gauss(rng);  // sawtooth glottal proxy
        const double env = std::sin(std::numbers::pi * t);
        y[i] = env * (1.0 * f1.step(source) + 0.6 * f2.step(source) + 0.25 * f3.step(source));
      }
    } else if (kind < 0.85) {
      fric.tune(3500.0 + 2500.0 * u(rng), 1500.0, sr);
      for (std::size_t i = pos; i < end; ++i) {
        const double t = static_cast<double>(i - pos) / seg;
        y[i] = 0.35 * std::sin(std::numbers::pi * t) * fric.step(gauss(rng));
      }
    } else {
      for (std::size_t i = pos; i < end; ++i) y[i] = 0.002 * gauss(rng);
    }
    pos = end;
  }
  double peak = 0.0;
  for (double v : y) peak = std::max(peak, std::abs(v));
  const double scale = peak > 0 ? 0.7 / peak : 0.0;
  for (std::size_t i = 0; i < n; ++i) clip.samples[i] = static_cast<float>(y[i] * scale);
  return clip;
}

corpus::Manifest make_clean_corpus(const std::filesystem::path& dir, const std::vector<std::string>& speakers,
                                   int clips_per_speaker, double seconds, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  corpus::Manifest m;
  for (const auto& spk : speakers) {
    const auto voice = voice_for(spk);
    for (int k = 0; k < clips_per_speaker; ++k) {
      const std::string rel = spk + "_s" + std::to_string(k) + ".wav";
      auto clip = speech_surrogate(seconds, 16000, voice, derive_seed(seed, "surrogate/" + spk, static_cast<std::uint64_t>(k)));
      clip.speaker_id = spk;
      clip.sentence_id = "s" + std::to_string(k);
      corpus::write_wav(clip, dir / rel);
      m.entries.push_back({rel, corpus::Degradation::kReference, "REFERENCE", spk, std::nullopt, std::nullopt});
    }
  }
  corpus::write_manifest(m, dir / "manifest.csv");
  return m;
}

}  // namespace sqa::synth
