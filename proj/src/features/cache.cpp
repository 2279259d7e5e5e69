#include "sqa/features/cache.hpp"

#include <cmath>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sqa/common/error.hpp"
#include "sqa/common/hash.hpp"
#include "sqa/common/log.hpp"
#include "sqa/corpus/wav.hpp"

namespace sqa::features {
namespace {

constexpr const char* kVersion = "sqa-logmel-cache v1";

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

FeatureCache::FeatureCache(std::filesystem::path dir, const FrontendConfig& cfg)
    : dir_(std::move(dir)), params_(cfg.describe()), bands_(cfg.mel_bands), frames_(cfg.fixed_frames) {
  static_assert(std::endian::native == std::endian::little, "feature cache assumes a little-endian host");
}

std::filesystem::path FeatureCache::data_path(const std::string& clip_ref) const {
  return dir_ / (to_hex(fnv1a64(clip_ref)) + ".f32");
}

std::filesystem::path FeatureCache::header_path(const std::string& clip_ref) const {
  return dir_ / (to_hex(fnv1a64(clip_ref)) + ".txt");
}

std::string FeatureCache::header_text(const LogMelFeature& f) const {
  std::ostringstream ss;
  ss << kVersion << "\nclip=" << f.clip_ref << "\nparams=" << params_ << "\nshape=" << f.bands << "x" << f.frames
     << "\ndtype=float32-le\n";
  return ss.str();
}

std::optional<LogMelFeature> FeatureCache::load(const std::string& clip_ref, CacheStatus* status) const {
  const auto set = [status](CacheStatus s) {
    if (status) *status = s;
  };
  const auto hdr = header_path(clip_ref);
  const auto dat = data_path(clip_ref);
  if (!std::filesystem::exists(hdr) || !std::filesystem::exists(dat)) {
    set(CacheStatus::kMiss);
    return std::nullopt;
  }
  LogMelFeature f;
  f.bands = bands_;
  f.frames = frames_;
  f.clip_ref = clip_ref;
  if (read_text(hdr) != header_text(f)) {
    set(CacheStatus::kStale);
    return std::nullopt;
  }
  const std::string blob = read_text(dat);
  const std::size_t expected = static_cast<std::size_t>(bands_) * frames_ * sizeof(float);
  if (blob.size() != expected) {
    set(CacheStatus::kCorrupt);
    return std::nullopt;
  }
  f.values.resize(static_cast<std::size_t>(bands_) * frames_);
  std::memcpy(f.values.data(), blob.data(), expected);
  for (float v : f.values)
    if (!std::isfinite(v)) {
      set(CacheStatus::kCorrupt);
      return std::nullopt;
    }
  set(CacheStatus::kHit);
  return f;
}

void FeatureCache::store(const LogMelFeature& feature) const {
  if (feature.bands != bands_ || feature.frames != frames_)
    throw Error(errc::kShape, "feature shape does not match the cache configuration");
  std::filesystem::create_directories(dir_);
  {
    std::ofstream out(data_path(feature.clip_ref), std::ios::binary);
    if (!out) throw Error(errc::kIo, "cannot write feature cache in " + dir_.string());
    out.write(reinterpret_cast<const char*>(feature.values.data()),
              static_cast<std::streamsize>(feature.values.size() * sizeof(float)));
  }
  std::ofstream(header_path(feature.clip_ref), std::ios::binary) << header_text(feature);
}

LogMelFeature FeatureCache::get_or_compute(const std::string& clip_ref, const std::filesystem::path& wav_path,
                                           const LogMelExtractor& extractor, CacheStatus* status) const {
  CacheStatus s = CacheStatus::kMiss;
  if (auto hit = load(clip_ref, &s)) {
    if (status) *status = s;
    return *hit;
  }
  if (s == CacheStatus::kCorrupt) warn("corrupt feature cache entry for " + clip_ref + "; recomputing");
  if (status) *status = s;
  LogMelFeature f = extract(extractor, corpus::read_wav(wav_path));
  f.clip_ref = clip_ref;
  store(f);
  return f;
}

}  // namespace sqa::features
