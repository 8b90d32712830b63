#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace msf {

enum class LogLevel : int { error = 0, info = 1, debug = 2 };

// Level comes from MSFILTER_LOG in {error, info, debug}; default error.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("MSFILTER_LOG");
    if (env == nullptr) return LogLevel::error;
    if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
    if (std::strcmp(env, "info") == 0) return LogLevel::info;
    return LogLevel::error;
  }();
  return level;
}

inline void log(LogLevel at, const std::string& msg) {
  if (static_cast<int>(at) > static_cast<int>(log_level())) return;
  const char* tag = at == LogLevel::error ? "error" : at == LogLevel::info ? "info" : "debug";
  std::fprintf(stderr, "[msfilter] %s: %s\n", tag, msg.c_str());
}

inline void log_error(const std::string& msg) { log(LogLevel::error, msg); }
inline void log_info(const std::string& msg) { log(LogLevel::info, msg); }
inline void log_debug(const std::string& msg) { log(LogLevel::debug, msg); }

}  // namespace msf
