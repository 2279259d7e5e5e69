#include "sqa/corpus/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "sqa/common/error.hpp"

namespace sqa::corpus {
namespace {

constexpr std::array<std::string_view, 5> kNames = {"CHOP", "CLIP", "ECHO", "NOISE", "REFERENCE"};
constexpr std::size_t kColumns = 6;

// RFC 4180 record splitter. Returns false at end of input.
bool next_record(std::string_view text, std::size_t& pos, std::vector<std::string>& fields,
                 std::size_t& row) {
  fields.clear();
  if (pos >= text.size()) return false;
  ++row;
  std::string field;
  bool quoted = false;
  while (pos < text.size()) {
    const char c = text[pos++];
    if (quoted) {
      if (c == '"') {
        if (pos < text.size() && text[pos] == '"') {
          field.push_back('"');
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && pos < text.size() && text[pos] == '\n') ++pos;
      break;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw Error(errc::kFormat, "manifest row " + std::to_string(row) + ": unterminated quote");
  fields.push_back(std::move(field));
  return true;
}

void append_field(std::string& out, const std::string& value) {
  if (value.find_first_of(",\"\r\n") == std::string::npos) {
    out += value;
    return;
  }
  out.push_back('"');
  for (char c : value) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

[[noreturn]] void bad_field(std::size_t row, std::string_view field, const std::string& why) {
  throw Error(errc::kFormat, "manifest row " + std::to_string(row) + ", field '" +
                                 std::string(field) + "': " + why);
}

}  // namespace

std::string_view to_string(Degradation d) { return kNames[static_cast<std::size_t>(d)]; }

Degradation parse_degradation(std::string_view text) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == text) return static_cast<Degradation>(i);
  throw Error(errc::kFormat, "unknown degradation class '" + std::string(text) + "'");
}

int class_index(Degradation d) { return static_cast<int>(d); }

Degradation class_from_index(int index) {
  if (index < 0 || index >= static_cast<int>(kNames.size()))
    throw Error(errc::kInvalidArgument, "degradation index out of range");
  return static_cast<Degradation>(index);
}

std::vector<std::string> Manifest::speakers() const {
  std::set<std::string> s;
  for (const auto& e : entries) s.insert(e.speaker_id);
  return {s.begin(), s.end()};
}

Manifest parse_manifest(std::string_view text) {
  Manifest m;
  std::size_t pos = 0, row = 0;
  std::vector<std::string> fields;
  if (!next_record(text, pos, fields, row)) throw Error(errc::kFormat, "manifest is empty");
  std::string header;
  for (std::size_t i = 0; i < fields.size(); ++i) header += (i ? "," : "") + fields[i];
  if (header != kManifestHeader)
    throw Error(errc::kFormat, "manifest row 1: header must be '" + std::string(kManifestHeader) + "'");

  while (next_record(text, pos, fields, row)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != kColumns)
      throw Error(errc::kFormat, "manifest row " + std::to_string(row) + ": expected 6 fields, got " +
                                     std::to_string(fields.size()));
    ManifestEntry e;
    e.clip_path = fields[0];
    if (e.clip_path.empty()) bad_field(row, "clip_path", "empty");
    try {
      e.degradation = parse_degradation(fields[1]);
    } catch (const Error&) {
      bad_field(row, "degradation_class", "unknown degradation class '" + fields[1] + "'");
    }
    e.condition_id = fields[2];
    e.speaker_id = fields[3];
    if (e.speaker_id.empty()) bad_field(row, "speaker_id", "empty");
    if (!fields[4].empty()) {
      double v = 0;
      const auto* first = fields[4].data();
      const auto* last = first + fields[4].size();
      const auto res = std::from_chars(first, last, v);
      if (res.ec != std::errc() || res.ptr != last) bad_field(row, "mos", "not a number: '" + fields[4] + "'");
      if (!(v >= 1.0 && v <= 5.0)) bad_field(row, "mos", "value " + fields[4] + " outside [1, 5]");
      e.mos = v;
    }
    if (!fields[5].empty()) {
      int f = 0;
      const auto* first = fields[5].data();
      const auto* last = first + fields[5].size();
      const auto res = std::from_chars(first, last, f);
      if (res.ec != std::errc() || res.ptr != last) bad_field(row, "fold", "not an integer: '" + fields[5] + "'");
      if (f < 0 || f > 3) bad_field(row, "fold", "value " + fields[5] + " outside [0, 3]");
      e.fold = f;
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(errc::kIo, "cannot open manifest " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_manifest(ss.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::string format_manifest(const Manifest& manifest) {
  std::string out(kManifestHeader);
  out.push_back('\n');
  for (const auto& e : manifest.entries) {
    append_field(out, e.clip_path);
    out.push_back(',');
    out += to_string(e.degradation);
    out.push_back(',');
    append_field(out, e.condition_id);
    out.push_back(',');
    append_field(out, e.speaker_id);
    out.push_back(',');
    if (e.mos) out += format_double(*e.mos);
    out.push_back(',');
    if (e.fold) out += std::to_string(*e.fold);
    out.push_back('\n');
  }
  return out;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    if (e.mos && !(*e.mos >= 1.0 && *e.mos <= 5.0))
      throw Error(errc::kInvalidArgument, "entry " + std::to_string(i) + ": mos outside [1, 5]");
    if (e.fold && (*e.fold < 0 || *e.fold > 3))
      throw Error(errc::kInvalidArgument, "entry " + std::to_string(i) + ": fold outside [0, 3]");
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(errc::kIo, "cannot write manifest " + path.string());
  const std::string text = format_manifest(manifest);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

std::filesystem::path resolve_clip_path(const std::filesystem::path& manifest_path,
                                        const std::string& clip_path) {
  std::filesystem::path p(clip_path);
  if (p.is_absolute()) return p;
  return manifest_path.parent_path() / p;
}

}  // namespace sqa::corpus
