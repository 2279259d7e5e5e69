#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "sqa/common/hash.hpp"

namespace sqa {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; decorrelates nearby seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// All randomness is derived from the experiment seed through named streams,
/// so no generator state ever has to be persisted.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream,
                                    std::uint64_t index = 0) {
  return mix64(mix64(seed ^ fnv1a64(stream)) + index);
}

/// Fisher-Yates with our own index draw so the permutation does not depend on
/// the standard library's shuffle implementation.
template <typename T>
void shuffle_in_place(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

}  // namespace sqa
