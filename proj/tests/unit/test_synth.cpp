#include <doctest.h>

#include <fstream>
#include <iterator>

#include "helpers.hpp"
#include "sqa/common/error.hpp"
#include "sqa/corpus/wav.hpp"
#include "sqa/synth/corpus_synth.hpp"
#include "sqa/synth/surrogate.hpp"

using namespace sqa;
using namespace sqa::synth;

namespace {

double measured_snr_db(const std::vector<float>& clean, const std::vector<float>& noisy, double peak_scale) {
  double ps = 0, pn = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double y = noisy[i] / peak_scale;
    ps += static_cast<double>(clean[i]) * clean[i];
    pn += (y - clean[i]) * (y - clean[i]);
  }
  return 10.0 * std::log10(ps / pn);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("clip clamps to the threshold") {
  const auto out = apply_clip(testing::clip_of({0.5f, -0.9f}), 0.6);
  CHECK(out.samples[0] == 0.5f);
  CHECK(out.samples[1] == -0.6f);
  const auto in = testing::clip_of(testing::white_noise(1000, 1));
  CHECK(apply_clip(in, 1.0).samples == in.samples);
  CHECK_THROWS_AS(apply_clip(in, 0.0), Error);
  CHECK_THROWS_AS(apply_clip(in, 1.2), Error);
}

TEST_CASE("clip is idempotent and bounded on random signals") {
  Rng rng(3);
  std::uniform_real_distribution<double> thr(0.05, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const auto in = testing::clip_of(testing::white_noise(64, 1000 + i, 0.6));
    const double t = thr(rng);
    const auto once = apply_clip(in, t);
    CHECK(apply_clip(once, t).samples == once.samples);
    for (float v : once.samples) CHECK(std::abs(v) <= static_cast<float>(t));
  }
}

TEST_CASE("chop zeroes the tail of each period") {
  const auto out = apply_chop_samples(testing::clip_of(std::vector<float>(30, 1.0f)), 10, 0.5);
  for (std::size_t i = 0; i < 30; ++i) CHECK(out.samples[i] == (i % 10 < 5 ? 1.0f : 0.0f));
  // Smallest fraction zeroes at most one sample per period.
  const auto tiny = apply_chop_samples(testing::clip_of(std::vector<float>(100, 1.0f)), 10, 0.01);
  for (std::size_t p = 0; p < 10; ++p) {
    int zeros = 0;
    for (std::size_t i = 0; i < 10; ++i) zeros += tiny.samples[p * 10 + i] == 0.0f;
    CHECK(zeros <= 1);
  }
  CHECK_THROWS_AS(apply_chop(testing::clip_of(std::vector<float>(100, 1.0f)), 20.0, 0.0), Error);
  CHECK_THROWS_AS(apply_chop(testing::clip_of(std::vector<float>(100, 1.0f)), 20.0, 0.1), Error);
}

TEST_CASE("chop keeps untouched samples and removes the expected energy") {
  Rng rng(5);
  std::uniform_real_distribution<double> frac(0.05, 0.9);
  const double periods[] = {20.0, 40.0, 80.0};
  for (int trial = 0; trial < 100; ++trial) {
    const auto in = testing::clip_of(testing::white_noise(16000, 500 + trial));
    const double f = frac(rng);
    const double period_ms = periods[trial % 3];
    const auto out = apply_chop(in, period_ms, f);
    const std::size_t period = static_cast<std::size_t>(std::llround(period_ms * 16));
    const std::size_t zeroed = static_cast<std::size_t>(std::llround(f * period));
    for (std::size_t i = 0; i < in.samples.size(); ++i) {
      if (i % period < period - zeroed) {
        if (out.samples[i] != in.samples[i]) FAIL("kept sample changed");
      } else if (out.samples[i] != 0.0f) {
        FAIL("chopped sample not zero");
      }
    }
    const double ratio = mean_square(out.samples) / mean_square(in.samples);
    CHECK(ratio <= 1.0);
    CHECK(ratio == doctest::Approx(1.0 - f).epsilon(0.02));
  }
}

TEST_CASE("echo with alpha 0 is the identity") {
  const auto in = testing::clip_of(testing::white_noise(4000, 2));
  CHECK(apply_echo(in, 100.0, 0.0).samples == in.samples);
  CHECK_THROWS_AS(apply_echo(in, 1000.0, 0.3), Error);
  CHECK_THROWS_AS(apply_echo(in, 10.0, 1.0), Error);
}

TEST_CASE("echo of a unit impulse") {
  std::vector<float> x(400, 0.0f);
  x[0] = 1.0f;
  const auto out = apply_echo(testing::clip_of(x), 10.0, 0.5);
  CHECK(out.samples[0] == doctest::Approx(1.0 / 1.5));
  CHECK(out.samples[160] == doctest::Approx(0.5 / 1.5));
  for (std::size_t i = 1; i < out.samples.size(); ++i)
    if (i != 160) CHECK(out.samples[i] == 0.0f);
}

TEST_CASE("echo cross-correlation peaks at lags 0 and d") {
  // Noise low-passed with a short moving average: broadband like fricatives,
  // no pitch periodicity to create spurious peaks.
  const auto w = testing::white_noise(16004, 9);
  std::vector<float> shaped(16000);
  for (std::size_t i = 0; i < shaped.size(); ++i) shaped[i] = (w[i] + w[i + 1] + w[i + 2] + w[i + 3]) / 4.0f;
  const auto in = testing::clip_of(shaped);
  const auto out = apply_echo(in, 25.0, 0.6);
  const std::size_t d = 400;
  std::vector<double> xc(800);
  for (std::size_t lag = 0; lag < xc.size(); ++lag)
    for (std::size_t n = lag; n < in.samples.size(); ++n) xc[lag] += static_cast<double>(out.samples[n]) * in.samples[n - lag];
  // Lag 0 is the global peak; the largest value away from 0 sits at d.
  const auto top = std::max_element(xc.begin(), xc.end()) - xc.begin();
  CHECK(top == 0);
  std::size_t best = 0;
  for (std::size_t lag = 0; lag < xc.size(); ++lag) {
    if (lag < 8) continue;  // skip the main lobe around 0
    if (best == 0 || xc[lag] > xc[best]) best = lag;
  }
  CHECK(best == d);
}

TEST_CASE("noise disabled is the identity") {
  const auto in = testing::clip_of(testing::white_noise(1000, 4));
  const auto out = apply_noise(in, kNoiseDisabled, NoiseKind::kWhite, 1);
  CHECK(out.clip.samples == in.samples);
  CHECK_THROWS_AS(apply_noise(testing::clip_of(std::vector<float>(100, 0.0f)), 10.0, NoiseKind::kWhite, 1), Error);
}

TEST_CASE("unit-power sine at 0 dB over 10 s") {
  auto in = testing::clip_of(testing::sine(160000, 440.0, 16000, std::sqrt(2.0)));
  // Samples exceed 1 here on purpose; SNR is defined before peak normalization.
  const auto out = apply_noise(in, 0.0, NoiseKind::kWhite, 12);
  CHECK(std::abs(measured_snr_db(in.samples, out.clip.samples, out.peak_scale)) < 0.05);
  for (float v : out.clip.samples) CHECK(std::abs(v) <= 1.0f);
}

TEST_CASE("measured SNR matches target on speech-like clips") {
  for (NoiseKind kind : {NoiseKind::kWhite, NoiseKind::kPink}) {
    for (double snr : {0.0, 10.0, 20.0, 30.0}) {
      for (int s = 0; s < 3; ++s) {
        const auto in = speech_surrogate(2.0, 16000, voice_for("spk" + std::to_string(s)), s);
        const auto out = apply_noise(in, snr, kind, 77 + s);
        CHECK(std::abs(measured_snr_db(in.samples, out.clip.samples, out.peak_scale) - snr) < 0.05);
      }
    }
  }
  const auto in = speech_surrogate(1.0, 16000, voice_for("x"), 1);
  CHECK(apply_noise(in, 10.0, NoiseKind::kWhite, 5).clip.samples == apply_noise(in, 10.0, NoiseKind::kWhite, 5).clip.samples);
  CHECK(apply_noise(in, 10.0, NoiseKind::kWhite, 5).clip.samples != apply_noise(in, 10.0, NoiseKind::kWhite, 6).clip.samples);
}

TEST_CASE("generators preserve length and rate") {
  const auto in = testing::clip_of(testing::white_noise(8000, 8), 8000);
  for (const auto& cond : ConditionGrid::defaults().conditions) {
    for (const auto& c : cond.second) {
      const auto out = apply(in, c, 1).clip;
      CHECK(out.samples.size() == in.samples.size());
      CHECK(out.sample_rate == in.sample_rate);
    }
  }
}

TEST_CASE("condition ids follow CLASS_param=value") {
  CHECK(DegradationCondition{ChopParams{20, 0.1}}.id() == "CHOP_period=20_fraction=0.1");
  CHECK(DegradationCondition{NoiseParams{kNoiseDisabled, NoiseKind::kPink}}.id() == "NOISE_snr=inf_kind=pink");
  CHECK(DegradationCondition{ReferenceParams{}}.id() == "REFERENCE");
}

namespace {
corpus::Manifest clean_set(const std::filesystem::path& dir, int speakers, int clips, double seconds = 0.5,
                           const std::string& prefix = "L") {
  std::vector<std::string> names;
  for (int s = 0; s < speakers; ++s) names.push_back(prefix + std::to_string(s));
  return make_clean_corpus(dir, names, clips, seconds, 3);
}
}  // namespace

TEST_CASE("761 per class gives 3805 rows") {
  testing::TempDir dir("synth");
  const auto clean = clean_set(dir.path / "clean", 20, 2, 0.5);
  SynthesisOptions opts;
  opts.per_class = 761;
  opts.seed = 1;
  const auto m = synthesize_corpus(clean, dir.path / "clean/manifest.csv", ConditionGrid::defaults(), dir.path / "out", opts);
  CHECK(m.size() == 3805);
  std::map<corpus::Degradation, int> counts;
  std::set<std::string> speakers;
  for (const auto& e : m.entries) {
    counts[e.degradation]++;
    speakers.insert(e.speaker_id);
  }
  for (auto d : corpus::kAllDegradations) CHECK(counts[d] == 761);
  CHECK(speakers.size() == 20);
}

TEST_CASE("same seed gives byte-identical manifests and audio") {
  testing::TempDir dir("synth");
  const auto clean = clean_set(dir.path / "clean", 3, 2);
  SynthesisOptions opts;
  opts.per_class = 12;
  opts.seed = 42;
  const auto cm = dir.path / "clean/manifest.csv";
  const auto a = synthesize_corpus(clean, cm, ConditionGrid::defaults(), dir.path / "a", opts);
  const auto b = synthesize_corpus(clean, cm, ConditionGrid::defaults(), dir.path / "b", opts);
  CHECK(slurp(dir.path / "a/manifest.csv") == slurp(dir.path / "b/manifest.csv"));
  for (const auto& e : a.entries) CHECK(slurp(dir.path / "a" / e.clip_path) == slurp(dir.path / "b" / e.clip_path));
  opts.seed = 43;
  const auto c = synthesize_corpus(clean, cm, ConditionGrid::defaults(), dir.path / "c", opts);
  bool differs = false;
  for (const auto& e : c.entries)
    if (e.degradation == corpus::Degradation::kNoise && std::filesystem::exists(dir.path / "a" / e.clip_path))
      differs |= slurp(dir.path / "a" / e.clip_path) != slurp(dir.path / "c" / e.clip_path);
  CHECK((differs || a != c));
}

TEST_CASE("reference-only grid copies inputs bit for bit") {
  testing::TempDir dir("synth");
  const auto clean = clean_set(dir.path / "clean", 2, 3);
  const auto cm = dir.path / "clean/manifest.csv";
  const auto m = synthesize_corpus(clean, cm, ConditionGrid::reference_only(), dir.path / "out", {});
  REQUIRE(m.size() == clean.size());
  std::multiset<std::string> in, out;
  for (const auto& e : clean.entries) in.insert(slurp(corpus::resolve_clip_path(cm, e.clip_path)));
  for (const auto& e : m.entries) out.insert(slurp(dir.path / "out" / e.clip_path));
  CHECK(in == out);
}

TEST_CASE("synthesis refuses held-out speakers and incomplete grids") {
  testing::TempDir dir("synth");
  const auto clean = clean_set(dir.path / "clean", 2, 1);
  const auto cm = dir.path / "clean/manifest.csv";
  SynthesisOptions opts;
  opts.excluded_speakers = {"L1"};
  try {
    synthesize_corpus(clean, cm, ConditionGrid::defaults(), dir.path / "out", opts);
    FAIL("expected leakage error");
  } catch (const Error& e) {
    CHECK(e.kind() == errc::kLeakage);
  }
  SynthesisOptions all;
  all.classes = {corpus::kAllDegradations.begin(), corpus::kAllDegradations.end()};
  CHECK_THROWS_AS(synthesize_corpus(clean, cm, ConditionGrid::reference_only(), dir.path / "out", all), Error);
  CHECK_THROWS_AS(synthesize_corpus({}, cm, ConditionGrid::defaults(), dir.path / "out", {}), Error);
}

TEST_CASE("pseudo MOS follows severity") {
  CHECK(pseudo_mos({ReferenceParams{}}) == doctest::Approx(4.5));
  CHECK(pseudo_mos({ClipParams{0.1}}) == doctest::Approx(4.5 - 3.4 * 0.9));
  CHECK(pseudo_mos({NoiseParams{40.0}}) == doctest::Approx(4.5));
  CHECK(pseudo_mos({NoiseParams{0.0}}) == doctest::Approx(1.1));
  CHECK(pseudo_mos({ChopParams{20, 0.4}}) < pseudo_mos({ChopParams{20, 0.1}}));
}
