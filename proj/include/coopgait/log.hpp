#pragma once

#include <string>

namespace coopgait {

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

/// Threshold from COOPGAIT_LOG (error, warn, info, debug or 0-3); warn when
/// unset.
LogLevel log_threshold();
/// Writes to stderr when `level` is at or below the threshold.
void log_line(LogLevel level, const std::string& msg);

}  // namespace coopgait
