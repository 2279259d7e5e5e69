#pragma once

#include <cstdint>
#include <filesystem>

namespace sqa::app {

struct DemoOptions {
  int large_speakers = 8;
  int clips_per_speaker = 6;
  std::uint64_t seed = 0;
};

/// Small self-contained experiment under `dir`: surrogate clean speech for
/// both corpora and a config.json scaled to finish in minutes on one core.
/// The large corpus has 200 degraded clips, the small one 120.
void write_demo(const std::filesystem::path& dir, const DemoOptions& opts = {});

}  // namespace sqa::app
