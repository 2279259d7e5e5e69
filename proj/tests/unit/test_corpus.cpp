#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "sqa/common/error.hpp"
#include "sqa/corpus/folds.hpp"
#include "sqa/corpus/manifest.hpp"
#include "sqa/corpus/wav.hpp"

using namespace sqa;
using namespace sqa::corpus;

TEST_CASE("wav round trip of silence is exact") {
  testing::TempDir dir("wav");
  auto clip = testing::clip_of(std::vector<float>(16000, 0.0f));
  write_wav(clip, dir.path / "s.wav");
  const auto back = read_wav(dir.path / "s.wav");
  CHECK(back.sample_rate == 16000);
  CHECK(back.samples == clip.samples);
}

TEST_CASE("full-scale sine survives quantization within 2^-15") {
  testing::TempDir dir("wav");
  auto clip = testing::clip_of(testing::sine(16000, 440.0, 16000, 1.0));
  write_wav(clip, dir.path / "s.wav");
  const auto back = read_wav(dir.path / "s.wav");
  REQUIRE(back.samples.size() == clip.samples.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < clip.samples.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(back.samples[i]) - clip.samples[i]));
  CHECK(worst <= std::ldexp(1.0, -15));
}

TEST_CASE("out-of-range samples are saturated and counted") {
  testing::TempDir dir("wav");
  auto clip = testing::clip_of({0.5f, 1.5f, -2.0f});
  CHECK(write_wav(clip, dir.path / "s.wav") == 2);
  const auto back = read_wav(dir.path / "s.wav");
  for (float v : back.samples) CHECK(std::abs(v) <= 1.0f);
}

TEST_CASE("stereo wav is rejected") {
  testing::TempDir dir("wav");
  // 44-byte header, 2 channels, 16-bit, two frames.
  std::ofstream out(dir.path / "st.wav", std::ios::binary);
  const auto u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  const auto u16 = [&](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };
  out << "RIFF";
  u32(36 + 8);
  out << "WAVEfmt ";
  u32(16);
  u16(1);
  u16(2);
  u32(16000);
  u32(16000 * 4);
  u16(4);
  u16(16);
  out << "data";
  u32(8);
  for (int i = 0; i < 4; ++i) u16(0);
  out.close();
  CHECK_THROWS_AS(read_wav(dir.path / "st.wav"), Error);
}

TEST_CASE("manifest parses a three-row file") {
  const std::string text = std::string(kManifestHeader) +
                           "\na.wav,CHOP,CHOP_period=20_fraction=0.1,spk1,3.5,0"
                           "\nb.wav,NOISE,NOISE_snr=10_kind=white,spk2,,"
                           "\nc.wav,REFERENCE,REFERENCE,spk3,4.25,3\n";
  const auto m = parse_manifest(text);
  REQUIRE(m.size() == 3);
  CHECK(m.entries[0].degradation == Degradation::kChop);
  CHECK(*m.entries[0].mos == 3.5);
  CHECK_FALSE(m.entries[1].mos.has_value());
  CHECK(*m.entries[2].fold == 3);
  CHECK(parse_manifest(format_manifest(m)) == m);
}

TEST_CASE("manifest errors name the offending row and field") {
  const std::string text = std::string(kManifestHeader) + "\na.wav,CLIP,CLIP_threshold=0.5,spk,3,\nb.wav,CLIP,x,spk,5.7,\n";
  try {
    parse_manifest(text);
    FAIL("expected an error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 3") != std::string::npos);
    CHECK(msg.find("mos") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_manifest(std::string(kManifestHeader) + "\na.wav,HISS,x,spk,,\n"), Error);
  CHECK_THROWS_AS(load_manifest("/nonexistent/manifest.csv"), Error);
}

TEST_CASE("random manifests round-trip losslessly") {
  Rng rng(7);
  std::uniform_real_distribution<double> mos(1.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    Manifest m;
    const int rows = 1 + static_cast<int>(rng() % 20);
    for (int r = 0; r < rows; ++r) {
      ManifestEntry e;
      e.clip_path = "dir, with \"quotes\"/clip" + std::to_string(rng() % 1000) + ".wav";
      e.degradation = class_from_index(static_cast<int>(rng() % 5));
      e.condition_id = "cond_" + std::to_string(r);
      e.speaker_id = "spk" + std::to_string(rng() % 7);
      if (rng() % 2) e.mos = mos(rng);
      if (rng() % 2) e.fold = static_cast<int>(rng() % 4);
      m.entries.push_back(e);
    }
    CHECK(parse_manifest(format_manifest(m)) == m);
  }
}

namespace {
Manifest speakers_manifest(int speakers, int clips_each) {
  Manifest m;
  for (int s = 0; s < speakers; ++s)
    for (int c = 0; c < clips_each; ++c)
      m.entries.push_back({"s" + std::to_string(s) + "_" + std::to_string(c) + ".wav", Degradation::kReference, "REFERENCE",
                           "spk" + std::to_string(s), 3.0, std::nullopt});
  return m;
}
}  // namespace

TEST_CASE("four speakers into four folds gives one test speaker each") {
  const auto m = speakers_manifest(4, 3);
  const auto plan = make_speaker_folds(m, 4, 11);
  REQUIRE(plan.fold_count == 4);
  std::set<std::string> all;
  for (const auto& s : plan.test_speakers) {
    CHECK(s.size() == 1);
    all.insert(s.begin(), s.end());
  }
  CHECK(all.size() == 4);
  for (int f = 0; f < 4; ++f) {
    const auto idx = split_indices(m, plan, f);
    CHECK(idx.test.size() == 3);
    CHECK(idx.train.size() == 9);
    for (const auto& s : idx.test_speakers) CHECK_FALSE(idx.train_speakers.count(s));
  }
}

TEST_CASE("single speaker single fold") {
  const auto plan = make_speaker_folds(speakers_manifest(1, 2), 1, 0);
  CHECK(plan.test_speakers.size() == 1);
  CHECK(plan.test_speakers[0].count("spk0"));
}

TEST_CASE("fold plans are deterministic and partition the speakers") {
  const auto m = speakers_manifest(20, 2);
  const auto a = make_speaker_folds(m, 4, 99);
  CHECK(a == make_speaker_folds(m, 4, 99));
  std::set<std::string> all;
  std::size_t total = 0;
  for (const auto& s : a.test_speakers) {
    total += s.size();
    all.insert(s.begin(), s.end());
  }
  CHECK(total == 20);
  CHECK(all.size() == 20);
  auto tagged = m;
  tag_folds(tagged, a);
  for (const auto& e : tagged.entries) CHECK(*e.fold == a.fold_of(e.speaker_id));
}

TEST_CASE("too few speakers for the fold count is an error") {
  CHECK_THROWS_AS(make_speaker_folds(speakers_manifest(3, 1), 4, 0), Error);
}
