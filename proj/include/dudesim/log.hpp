#pragma once

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace dudesim {

// Diagnostics go to stderr so machine-readable stdout stays clean.
// Level comes from DUDESIM_LOG (error | info | debug), default error.

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

inline LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("DUDESIM_LOG");
    if (!env) return LogLevel::Error;
    std::string v(env);
    if (v == "debug") return LogLevel::Debug;
    if (v == "info") return LogLevel::Info;
    return LogLevel::Error;
  }();
  return level;
}

inline std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}

inline void log_at(LogLevel lv, const char* tag, const std::string& msg) {
  if (log_level() < lv) return;
  std::lock_guard<std::mutex> lock(log_mutex());
  std::cerr << "[" << tag << "] " << msg << '\n';
}

inline void log_error(const std::string& msg) { log_at(LogLevel::Error, "error", msg); }
inline void log_info(const std::string& msg) { log_at(LogLevel::Info, "info", msg); }
inline void log_debug(const std::string& msg) { log_at(LogLevel::Debug, "debug", msg); }

}  // namespace dudesim
