#pragma once

#include <string>

namespace exnet {

enum class LogLevel { Debug = 0, Info = 1, Warning = 2, Error = 3 };

// Timestamped logging to stderr, optionally mirrored to a file. Used by the
// CLI tools and the data/training pipeline; safe to call before setup.
void log(LogLevel level, const std::string& message);
void log_info(const std::string& message);
void log_warning(const std::string& message);
void log_error(const std::string& message);

// Mirrors subsequent log lines to `path` (append). Empty path stops mirroring.
void set_log_file(const std::string& path);

// Messages below this level are dropped (default Info).
void set_log_level(LogLevel level);

}  // namespace exnet
