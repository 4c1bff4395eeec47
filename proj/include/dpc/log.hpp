#pragma once

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>

namespace dpc {

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

/// Threshold is read once from DPC_LOG (error|warn|info|debug); default warn.
inline LogLevel& log_threshold() {
  static LogLevel level = [] {
    const char* env = std::getenv("DPC_LOG");
    if (env == nullptr) return LogLevel::kWarn;
    if (std::strcmp(env, "error") == 0) return LogLevel::kError;
    if (std::strcmp(env, "info") == 0) return LogLevel::kInfo;
    if (std::strcmp(env, "debug") == 0) return LogLevel::kDebug;
    return LogLevel::kWarn;
  }();
  return level;
}

inline void log_message(LogLevel level, const std::string& msg) {
  if (level > log_threshold()) return;
  static constexpr const char* kNames[] = {"error", "warn", "info", "debug"};
  std::clog << "[dpc " << kNames[static_cast<int>(level)] << "] " << msg << '\n';
}

inline void log_warn(const std::string& msg) { log_message(LogLevel::kWarn, msg); }
inline void log_info(const std::string& msg) { log_message(LogLevel::kInfo, msg); }
inline void log_debug(const std::string& msg) { log_message(LogLevel::kDebug, msg); }

}  // namespace dpc
