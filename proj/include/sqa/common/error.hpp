#pragma once

#include <stdexcept>
#include <string>

namespace sqa {

/// Every failure raised by the toolkit. `kind()` is a short machine-readable
/// class ("io", "format", "invalid_argument", ...) that the CLI prints on exit.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

namespace errc {
inline constexpr const char* kIo = "io";
inline constexpr const char* kFormat = "format";
inline constexpr const char* kInvalidArgument = "invalid_argument";
inline constexpr const char* kShape = "shape";
inline constexpr const char* kNumeric = "numeric";
inline constexpr const char* kConfig = "config";
inline constexpr const char* kDependency = "dependency";
inline constexpr const char* kLeakage = "leakage";
inline constexpr const char* kUndefined = "undefined_metric";
}  // namespace errc

}  // namespace sqa
