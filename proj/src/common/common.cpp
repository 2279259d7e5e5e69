#include <cstdio>
#include <iostream>

#include "sqa/common/hash.hpp"
#include "sqa/common/log.hpp"
#include "sqa/common/rng.hpp"

namespace sqa {

std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  shuffle_in_place(idx, rng);
  return idx;
}

void warn(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

}  // namespace sqa
