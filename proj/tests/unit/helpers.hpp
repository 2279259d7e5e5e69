#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>
#include <algorithm>

#include "sqa/common/rng.hpp"
#include "sqa/corpus/audio_clip.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on scope exit.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("sqa_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

inline std::vector<float> white_noise(std::size_t n, std::uint64_t seed, double scale = 0.3) {
  sqa::Rng rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  std::vector<float> x(n);
  for (auto& v : x) v = static_cast<float>(std::clamp(g(rng), -1.0, 1.0));
  return x;
}

inline sqa::corpus::AudioClip clip_of(std::vector<float> samples, int rate = 16000) {
  sqa::corpus::AudioClip c;
  c.samples = std::move(samples);
  c.sample_rate = rate;
  return c;
}

inline std::vector<float> sine(std::size_t n, double freq, int rate, double amp = 1.0) {
  std::vector<float> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<float>(amp * std::sin(2.0 * M_PI * freq * i / rate));
  return x;
}

}  // namespace testing
