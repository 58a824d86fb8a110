#pragma once

#include <functional>
#include <string>

namespace eyessl {

enum class LogLevel { kInfo, kWarning };

using LogSink = std::function<void(LogLevel, const std::string&)>;

// Replaces the process-wide sink (default writes to stderr). Returns the
// previous sink so tests can restore it.
LogSink set_log_sink(LogSink sink);

void log_info(const std::string& message);
void log_warning(const std::string& message);

}  // namespace eyessl
