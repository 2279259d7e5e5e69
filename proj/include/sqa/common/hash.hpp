#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace sqa {

/// 64-bit FNV-1a. Stable across platforms; used for config hashes, spec
/// descriptors and per-clip seed derivation.
constexpr std::uint64_t fnv1a64(std::string_view text,
                                std::uint64_t state = 0xcbf29ce484222325ULL) {
  for (unsigned char c : text) {
    state ^= c;
    state *= 0x100000001b3ULL;
  }
  return state;
}

inline std::uint64_t fnv1a64_bytes(std::span<const std::byte> bytes,
                                   std::uint64_t state = 0xcbf29ce484222325ULL) {
  for (std::byte b : bytes) {
    state ^= static_cast<std::uint64_t>(b);
    state *= 0x100000001b3ULL;
  }
  return state;
}

std::string to_hex(std::uint64_t value);

}  // namespace sqa
