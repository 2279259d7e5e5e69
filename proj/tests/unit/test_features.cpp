#include <doctest.h>

#include <complex>
#include <fstream>

#include "helpers.hpp"
#include "sqa/common/error.hpp"
#include "sqa/corpus/wav.hpp"
#include "sqa/features/cache.hpp"
#include "sqa/features/frontend.hpp"

using namespace sqa;
using namespace sqa::features;

namespace {

// Plain DFT magnitude at a single frequency (Goertzel-style projection).
double tone_power(const std::vector<float>& x, double freq, int rate) {
  std::complex<double> acc = 0;
  for (std::size_t n = 0; n < x.size(); ++n)
    acc += static_cast<double>(x[n]) * std::polar(1.0, -2.0 * M_PI * freq * static_cast<double>(n) / rate);
  return std::norm(acc) / static_cast<double>(x.size() * x.size());
}

double mean_power(const std::vector<float>& x) {
  double acc = 0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return acc / static_cast<double>(x.size());
}

LogMelFeature ramp(int bands, int frames) {
  LogMelFeature f{bands, frames, std::vector<float>(static_cast<std::size_t>(bands) * frames), "r"};
  for (int b = 0; b < bands; ++b)
    for (int t = 0; t < frames; ++t) f.at(b, t) = static_cast<float>(t);
  return f;
}

}  // namespace

TEST_CASE("frame count of an 8 s clip") {
  FrontendConfig cfg;
  CHECK(frame_count(128000, cfg) == (128000 - 400) / 160 + 1);
  CHECK(frame_count(128000, cfg) == 798);
  CHECK(frame_count(400, cfg) == 1);
  LogMelExtractor ex;
  const auto f = ex.compute(testing::clip_of(testing::white_noise(128000, 1)));
  CHECK(f.bands == 64);
  CHECK(f.frames == 798);
  CHECK_THROWS_AS(ex.compute(testing::clip_of(std::vector<float>(399, 0.1f))), Error);
}

TEST_CASE("16 kHz input is passed through unchanged") {
  const auto in = testing::clip_of(testing::white_noise(1000, 2));
  CHECK(resample_to_16k(in).samples == in.samples);
  CHECK_THROWS_AS(resample_to_16k(testing::clip_of(testing::white_noise(1000, 2), 8000)), Error);
}

TEST_CASE("48 kHz 440 Hz sine keeps its peak") {
  const auto out = resample_to_16k(testing::clip_of(testing::sine(48000, 440.0, 48000, 0.5), 48000));
  CHECK(out.sample_rate == 16000);
  CHECK(out.samples.size() == 16000);
  // Scan 430..450 Hz in 0.25 Hz steps.
  double best_f = 0, best_p = -1;
  for (double f = 430.0; f <= 450.0; f += 0.25) {
    const double p = tone_power(out.samples, f, 16000);
    if (p > best_p) best_p = p, best_f = f;
  }
  CHECK(std::abs(best_f - 440.0) <= 1.0);
}

TEST_CASE("48 kHz 10 kHz sine falls in the stopband") {
  const auto in = testing::clip_of(testing::sine(48000, 10000.0, 48000, 0.5), 48000);
  const auto out = resample_to_16k(in);
  const double pin = mean_power(in.samples);
  const double pout = mean_power(out.samples);
  CHECK(10.0 * std::log10(pin / pout) >= 40.0);
}

TEST_CASE("silence gives the log floor in every band") {
  LogMelExtractor ex;
  const auto f = ex.compute(testing::clip_of(std::vector<float>(16000, 0.0f)));
  for (float v : f.values) CHECK(v == doctest::Approx(std::log(1e-10)));
}

TEST_CASE("1 kHz tone peaks in the band containing 1 kHz") {
  LogMelExtractor ex;
  const auto f = ex.compute(testing::clip_of(testing::sine(16000, 1000.0, 16000, 0.5)));
  // Oracle: the band whose triangle weight at the 1 kHz bin is largest.
  const auto& cfg = ex.config();
  const int bins = cfg.fft_size / 2 + 1;
  const auto fb = mel_filterbank(cfg);
  const int bin = static_cast<int>(std::lround(1000.0 * cfg.fft_size / cfg.sample_rate));
  int expect = 0;
  for (int b = 1; b < cfg.mel_bands; ++b)
    if (fb[b * bins + bin] > fb[expect * bins + bin]) expect = b;
  const int t = f.frames / 2;
  int got = 0;
  for (int b = 1; b < f.bands; ++b)
    if (f.at(b, t) > f.at(got, t)) got = b;
  CHECK(got == expect);
  // HTK mel of 1 kHz is 1000.0 by construction.
  CHECK(hz_to_mel(1000.0) == doctest::Approx(1000.0).epsilon(1e-3));
  CHECK(mel_to_hz(hz_to_mel(3210.0)) == doctest::Approx(3210.0));
}

TEST_CASE("features are deterministic and finite") {
  LogMelExtractor ex;
  const auto clip = testing::clip_of(testing::white_noise(20000, 5));
  const auto a = extract(ex, clip);
  const auto b = extract(ex, clip);
  CHECK(a.values == b.values);
  for (float v : a.values) CHECK(std::isfinite(v));
}

TEST_CASE("fix_length crop and pad") {
  const auto same = fix_length(ramp(3, 10), 10);
  CHECK(same.values == ramp(3, 10).values);
  const auto half = fix_length(ramp(2, 20), 10);
  for (int t = 0; t < 10; ++t) CHECK(half.at(1, t) == static_cast<float>(t + 5));
  const auto padded = fix_length(ramp(1, 4), 7);
  CHECK(padded.frames == 7);
  for (int t = 0; t < 7; ++t) CHECK(padded.at(0, t) >= 0.0f);
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const int frames = 1 + static_cast<int>(rng() % 48);
    const auto out = fix_length(ramp(2, frames), 16);
    CHECK(out.frames == 16);
    CHECK(out.values.size() == 32);
  }
}

TEST_CASE("normalization uses training statistics only") {
  std::vector<LogMelFeature> train;
  for (int i = 0; i < 5; ++i) {
    LogMelFeature f{3, 8, {}, "t" + std::to_string(i)};
    const auto w = testing::white_noise(24, 100 + i, 2.0);
    f.values.assign(w.begin(), w.end());
    for (int t = 0; t < 8; ++t) f.at(2, t) = 4.0f;  // constant band
    train.push_back(f);
  }
  const auto stats = compute_stats(train, {"fold0/train"});
  CHECK(stats.stddev[2] == doctest::Approx(kStdFloor));
  std::vector<double> sum(3), sq(3);
  for (auto f : train) {
    apply_stats(f, stats);
    for (int b = 0; b < 3; ++b)
      for (int t = 0; t < 8; ++t) {
        CHECK(std::isfinite(f.at(b, t)));
        sum[b] += f.at(b, t);
        sq[b] += static_cast<double>(f.at(b, t)) * f.at(b, t);
      }
  }
  for (int b = 0; b < 2; ++b) {
    const double mu = sum[b] / 40.0;
    CHECK(std::abs(mu) < 1e-6);
    CHECK(std::abs(std::sqrt(sq[b] / 40.0 - mu * mu) - 1.0) < 1e-6);
  }
  LogMelFeature test{3, 8, {}, "x"};
  const auto w = testing::white_noise(24, 999, 5.0);
  test.values.assign(w.begin(), w.end());
  apply_stats(test, stats);
  double mu = 0;
  for (int t = 0; t < 8; ++t) mu += test.at(0, t) / 8.0;
  double var = 0;
  for (int t = 0; t < 8; ++t) var += (test.at(0, t) - mu) * (test.at(0, t) - mu) / 8.0;
  CHECK((std::abs(mu) > 1e-3 || std::abs(std::sqrt(var) - 1.0) > 1e-3));

  const std::vector<std::string> test_tags{"fold0/test"};
  CHECK_NOTHROW(assert_no_leakage(stats, test_tags));
  const auto leaky = compute_stats(train, {"fold0/train", "fold0/test"});
  try {
    assert_no_leakage(leaky, test_tags);
    FAIL("expected leakage error");
  } catch (const Error& e) {
    CHECK(e.kind() == errc::kLeakage);
  }
}

TEST_CASE("feature cache hit, stale and corrupt entries") {
  testing::TempDir dir("cache");
  const auto wav = dir.path / "a.wav";
  corpus::write_wav(testing::clip_of(testing::white_noise(8000, 3)), wav);
  FrontendConfig cfg;
  cfg.fixed_frames = 32;
  LogMelExtractor ex(cfg);
  FeatureCache cache(dir.path / "cache", cfg);
  CacheStatus st;
  const auto first = cache.get_or_compute("a.wav", wav, ex, &st);
  CHECK(st == CacheStatus::kMiss);
  const auto second = cache.get_or_compute("a.wav", wav, ex, &st);
  CHECK(st == CacheStatus::kHit);
  CHECK(first.values == second.values);
  CHECK(first.values == extract(ex, corpus::read_wav(wav)).values);

  FrontendConfig other = cfg;
  other.hop = 128;
  FeatureCache changed(dir.path / "cache", other);
  changed.load("a.wav", &st);
  CHECK(st == CacheStatus::kStale);

  std::filesystem::resize_file(cache.data_path("a.wav"), 10);
  cache.load("a.wav", &st);
  CHECK(st == CacheStatus::kCorrupt);
  const auto again = cache.get_or_compute("a.wav", wav, ex, &st);
  CHECK(again.values == first.values);
  cache.load("a.wav", &st);
  CHECK(st == CacheStatus::kHit);
}
