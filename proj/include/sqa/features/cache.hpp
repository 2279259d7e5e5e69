#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "sqa/features/frontend.hpp"

namespace sqa::features {

enum class CacheStatus { kHit, kMiss, kStale, kCorrupt };

/// On-disk feature store: `<key>.f32` holds bands*frames little-endian
/// float32 values; `<key>.txt` is a text header naming the format version and
/// the frontend parameters. A header whose parameters differ from the
/// current config invalidates the entry.
class FeatureCache {
 public:
  FeatureCache(std::filesystem::path dir, const FrontendConfig& cfg);

  std::optional<LogMelFeature> load(const std::string& clip_ref, CacheStatus* status = nullptr) const;
  void store(const LogMelFeature& feature) const;

  /// Load or compute-and-store. Corrupt entries are recomputed with a warning.
  LogMelFeature get_or_compute(const std::string& clip_ref, const std::filesystem::path& wav_path,
                               const LogMelExtractor& extractor, CacheStatus* status = nullptr) const;

  std::filesystem::path data_path(const std::string& clip_ref) const;
  std::filesystem::path header_path(const std::string& clip_ref) const;

 private:
  std::string header_text(const LogMelFeature& f) const;
  std::filesystem::path dir_;
  std::string params_;
  int bands_;
  int frames_;
};

}  // namespace sqa::features
