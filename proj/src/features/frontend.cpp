#include "sqa/features/frontend.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <sstream>

#include "sqa/common/error.hpp"

namespace sqa::features {
namespace {

constexpr double kPi = 3.14159265358979323846;

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

}  // namespace

std::string FrontendConfig::describe() const {
  std::ostringstream ss;
  ss.precision(17);
  ss << "sample_rate=" << sample_rate << ";mel_bands=" << mel_bands << ";window=" << window << ";hop=" << hop
     << ";fft_size=" << fft_size << ";fmin=" << fmin << ";fmax=" << fmax << ";log_floor=" << log_floor
     << ";fixed_frames=" << fixed_frames << ";window_kind=hann_periodic;mel=htk";
  return ss.str();
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  corpus::validate(clip);
  if (clip.sample_rate == target_rate) return clip;
  if (clip.sample_rate < target_rate)
    throw Error(errc::kInvalidArgument, "refusing to upsample from " + std::to_string(clip.sample_rate) + " Hz to " +
                                            std::to_string(target_rate) + " Hz");
  const int g = std::gcd(clip.sample_rate, target_rate);
  const long up = target_rate / g;            // L
  const long down = clip.sample_rate / g;     // M
  const double ratio = static_cast<double>(clip.sample_rate) / target_rate;  // input samples per output sample

  // Lowpass at 0.45 * target rate, expressed in input-rate cycles/sample.
  const double cutoff = 0.45 * target_rate / clip.sample_rate;
  const int half = static_cast<int>(std::ceil(32.0 * ratio));
  const double beta = 7.857;  // Kaiser beta for ~80 dB
  const double i0_beta = std::cyl_bessel_i(0.0, beta);

  // One kernel per fractional phase p/L of the input grid.
  std::vector<std::vector<double>> table(static_cast<std::size_t>(up));
  for (long p = 0; p < up; ++p) {
    const double frac = static_cast<double>(p) / up;
    auto& taps = table[static_cast<std::size_t>(p)];
    taps.resize(2 * static_cast<std::size_t>(half) + 1);
    for (int k = -half; k <= half; ++k) {
      const double tau = frac - k;  // distance from output instant to input sample (base + k)
      const double r = tau / (half + 1);
      const double w = std::abs(r) < 1.0 ? std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - r * r)) / i0_beta : 0.0;
      taps[static_cast<std::size_t>(k + half)] = 2.0 * cutoff * sinc(2.0 * cutoff * tau) * w;
    }
  }

  AudioClip out;
  out.sample_rate = target_rate;
  out.speaker_id = clip.speaker_id;
  out.sentence_id = clip.sentence_id;
  out.source_path = clip.source_path;
  const std::size_t n_in = clip.samples.size();
  const std::size_t n_out = static_cast<std::size_t>((static_cast<unsigned long long>(n_in) * up) / down);
  out.samples.resize(n_out);
  const auto n_signed = static_cast<long long>(n_in);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t m = 0; m < static_cast<std::ptrdiff_t>(n_out); ++m) {
    const long long pos = static_cast<long long>(m) * down;
    const long long base = pos / up;
    const auto& taps = table[static_cast<std::size_t>(pos % up)];
    double acc = 0.0;
    for (int k = -half; k <= half; ++k) {
      const long long i = base + k;
      if (i < 0 || i >= n_signed) continue;
      acc += taps[static_cast<std::size_t>(k + half)] * clip.samples[static_cast<std::size_t>(i)];
    }
    out.samples[static_cast<std::size_t>(m)] = static_cast<float>(acc);
  }
  return out;
}

AudioClip resample_to_16k(const AudioClip& clip) { return resample(clip, 16000); }

int frame_count(std::size_t samples, const FrontendConfig& cfg) {
  if (samples < static_cast<std::size_t>(cfg.window)) return 0;
  return static_cast<int>((samples - static_cast<std::size_t>(cfg.window)) / static_cast<std::size_t>(cfg.hop)) + 1;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_filterbank(const FrontendConfig& cfg) {
  const int bins = cfg.fft_size / 2 + 1;
  const double lo = hz_to_mel(cfg.fmin), hi = hz_to_mel(cfg.fmax);
  std::vector<double> edges(static_cast<std::size_t>(cfg.mel_bands) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.mel_bands + 1));
  std::vector<double> fb(static_cast<std::size_t>(cfg.mel_bands) * bins, 0.0);
  for (int m = 0; m < cfg.mel_bands; ++m) {
    const double f0 = edges[m], f1 = edges[m + 1], f2 = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.fft_size;
      double w = 0.0;
      if (f > f0 && f <= f1) w = (f - f0) / (f1 - f0);
      else if (f > f1 && f < f2) w = (f2 - f) / (f2 - f1);
      fb[static_cast<std::size_t>(m) * bins + k] = w;
    }
  }
  return fb;
}

struct LogMelExtractor::Plan {
  fftw_plan plan = nullptr;
  ~Plan() {
    if (plan) {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan);
    }
  }
};

LogMelExtractor::LogMelExtractor(FrontendConfig cfg) : cfg_(cfg), plan_(std::make_unique<Plan>()) {
  if (cfg_.mel_bands <= 0 || cfg_.window <= 0 || cfg_.hop <= 0 || cfg_.fft_size < cfg_.window)
    throw Error(errc::kConfig, "invalid frontend configuration: " + cfg_.describe());
  window_.resize(static_cast<std::size_t>(cfg_.window));
  for (int n = 0; n < cfg_.window; ++n) window_[n] = 0.5 - 0.5 * std::cos(2.0 * kPi * n / cfg_.window);
  filters_ = mel_filterbank(cfg_);
  double* in = fftw_alloc_real(static_cast<std::size_t>(cfg_.fft_size));
  fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(cfg_.fft_size / 2 + 1));
  {
    std::lock_guard lock(planner_mutex());
    plan_->plan = fftw_plan_dft_r2c_1d(cfg_.fft_size, in, out, FFTW_ESTIMATE);
  }
  fftw_free(in);
  fftw_free(out);
}

LogMelExtractor::~LogMelExtractor() = default;

LogMelFeature LogMelExtractor::compute(const AudioClip& clip) const {
  corpus::validate(clip);
  if (clip.sample_rate != cfg_.sample_rate)
    throw Error(errc::kInvalidArgument, "log-mel expects " + std::to_string(cfg_.sample_rate) + " Hz input, got " +
                                            std::to_string(clip.sample_rate));
  const int frames = frame_count(clip.samples.size(), cfg_);
  if (frames < 1) throw Error(errc::kInvalidArgument, "clip is shorter than one analysis window");

  const int bins = cfg_.fft_size / 2 + 1;
  LogMelFeature f;
  f.bands = cfg_.mel_bands;
  f.frames = frames;
  f.values.resize(static_cast<std::size_t>(f.bands) * frames);

  double* in = fftw_alloc_real(static_cast<std::size_t>(cfg_.fft_size));
  fftw_complex* spec = fftw_alloc_complex(static_cast<std::size_t>(bins));
  std::vector<double> power(static_cast<std::size_t>(bins));
  for (int t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * cfg_.hop;
    for (int n = 0; n < cfg_.fft_size; ++n)
      in[n] = n < cfg_.window ? window_[n] * clip.samples[start + n] : 0.0;
    fftw_execute_dft_r2c(plan_->plan, in, spec);
    for (int k = 0; k < bins; ++k) power[k] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
    for (int m = 0; m < f.bands; ++m) {
      const double* w = filters_.data() + static_cast<std::size_t>(m) * bins;
      double e = 0.0;
      for (int k = 0; k < bins; ++k) e += w[k] * power[k];
      f.at(m, t) = static_cast<float>(std::log(e + cfg_.log_floor));
    }
  }
  fftw_free(in);
  fftw_free(spec);
  return f;
}

LogMelFeature fix_length(const LogMelFeature& feature, int frames) {
  if (feature.frames < 1) throw Error(errc::kInvalidArgument, "feature has no frames");
  if (frames < 1) throw Error(errc::kInvalidArgument, "target frame count must be positive");
  LogMelFeature out;
  out.bands = feature.bands;
  out.frames = frames;
  out.clip_ref = feature.clip_ref;
  out.values.resize(static_cast<std::size_t>(out.bands) * frames);
  const int f = feature.frames;
  if (f >= frames) {
    const int start = (f - frames) / 2;
    for (int b = 0; b < out.bands; ++b)
      for (int t = 0; t < frames; ++t) out.at(b, t) = feature.at(b, start + t);
    return out;
  }
  const int left = (frames - f) / 2;
  const int period = 2 * (f - 1);
  for (int t = 0; t < frames; ++t) {
    int src = 0;
    if (f > 1) {
      src = ((t - left) % period + period) % period;
      if (src >= f) src = period - src;
    }
    for (int b = 0; b < out.bands; ++b) out.at(b, t) = feature.at(b, src);
  }
  return out;
}

NormalizationStats compute_stats(std::span<const LogMelFeature> training, std::vector<std::string> provenance) {
  if (training.empty()) throw Error(errc::kInvalidArgument, "cannot compute statistics on an empty split");
  const int bands = training.front().bands;
  NormalizationStats s;
  s.provenance = std::move(provenance);
  s.mean.assign(static_cast<std::size_t>(bands), 0.0);
  s.stddev.assign(static_cast<std::size_t>(bands), 0.0);
  std::vector<double> count(static_cast<std::size_t>(bands), 0.0);
  for (const auto& f : training) {
    if (f.bands != bands) throw Error(errc::kShape, "features disagree on band count");
    for (int b = 0; b < bands; ++b)
      for (int t = 0; t < f.frames; ++t) {
        s.mean[b] += f.at(b, t);
        count[b] += 1.0;
      }
  }
  for (int b = 0; b < bands; ++b) s.mean[b] /= count[b];
  for (const auto& f : training)
    for (int b = 0; b < bands; ++b)
      for (int t = 0; t < f.frames; ++t) {
        const double d = f.at(b, t) - s.mean[b];
        s.stddev[b] += d * d;
      }
  for (int b = 0; b < bands; ++b) s.stddev[b] = std::max(std::sqrt(s.stddev[b] / count[b]), kStdFloor);
  return s;
}

void apply_stats(LogMelFeature& feature, const NormalizationStats& stats) {
  if (static_cast<std::size_t>(feature.bands) != stats.mean.size())
    throw Error(errc::kShape, "normalization statistics do not match the band count");
  for (int b = 0; b < feature.bands; ++b)
    for (int t = 0; t < feature.frames; ++t)
      feature.at(b, t) = static_cast<float>((feature.at(b, t) - stats.mean[b]) / stats.stddev[b]);
}

void assert_no_leakage(const NormalizationStats& stats, std::span<const std::string> test_tags) {
  for (const auto& tag : test_tags)
    if (std::find(stats.provenance.begin(), stats.provenance.end(), tag) != stats.provenance.end())
      throw Error(errc::kLeakage, "normalization statistics were computed on test split '" + tag + "'");
}

LogMelFeature extract(const LogMelExtractor& extractor, const AudioClip& clip) {
  const auto& cfg = extractor.config();
  const AudioClip at_rate = clip.sample_rate == cfg.sample_rate ? clip : resample(clip, cfg.sample_rate);
  return fix_length(extractor.compute(at_rate), cfg.fixed_frames);
}

}  // namespace sqa::features
