#pragma once

#include <functional>
#include <string>

namespace sqa {

/// Sink for machine-readable `key=value` training and progress lines.
using LogSink = std::function<void(const std::string&)>;

inline void emit(const LogSink& sink, const std::string& line) {
  if (sink) sink(line);
}

void warn(const std::string& message);

}  // namespace sqa
