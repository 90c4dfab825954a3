#include "coopgait/log.hpp"

#include <cstdlib>
#include <iostream>

namespace coopgait {

LogLevel log_threshold() {
  static const LogLevel level = [] {
    const char* env = std::getenv("COOPGAIT_LOG");
    if (!env) return LogLevel::kWarn;
    const std::string s(env);
    if (s == "error" || s == "0") return LogLevel::kError;
    if (s == "info" || s == "2") return LogLevel::kInfo;
    if (s == "debug" || s == "3") return LogLevel::kDebug;
    return LogLevel::kWarn;
  }();
  return level;
}

void log_line(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) > static_cast<int>(log_threshold())) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::cerr << "[coopgait " << names[static_cast<int>(level)] << "] " << msg << '\n';
}

}  // namespace coopgait
