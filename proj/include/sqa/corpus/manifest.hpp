#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sqa::corpus {

enum class Degradation { kChop, kClip, kEcho, kNoise, kReference };

inline constexpr std::array<Degradation, 5> kAllDegradations = {
    Degradation::kChop, Degradation::kClip, Degradation::kEcho,
    Degradation::kNoise, Degradation::kReference};

/// The four classes reported per column, in report order.
inline constexpr std::array<Degradation, 4> kReportedDegradations = {
    Degradation::kChop, Degradation::kClip, Degradation::kEcho,
    Degradation::kNoise};

std::string_view to_string(Degradation d);
Degradation parse_degradation(std::string_view text);
int class_index(Degradation d);
Degradation class_from_index(int index);

struct ManifestEntry {
  std::string clip_path;
  Degradation degradation = Degradation::kReference;
  std::string condition_id;
  std::string speaker_id;
  std::optional<double> mos;
  std::optional<int> fold;

  bool operator==(const ManifestEntry&) const = default;
};

inline constexpr std::string_view kManifestHeader =
    "clip_path,degradation_class,condition_id,speaker_id,mos,fold";

struct Manifest {
  std::vector<ManifestEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool operator==(const Manifest&) const = default;

  std::vector<std::string> speakers() const;  // sorted, unique
};

/// Throws sqa::Error naming the row (1-based, header is row 1) and field.
Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(std::string_view text);

void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
std::string format_manifest(const Manifest& manifest);

/// Clip paths inside a manifest may be relative to the manifest's directory.
std::filesystem::path resolve_clip_path(const std::filesystem::path& manifest_path,
                                        const std::string& clip_path);

}  // namespace sqa::corpus
