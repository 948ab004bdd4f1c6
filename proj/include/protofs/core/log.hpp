#pragma once

#include <functional>
#include <string>

namespace protofs {

enum class LogLevel { Info, Warning };

using LogSink = std::function<void(LogLevel, const std::string&)>;

/// Diagnostics go to standard error unless a sink is installed.
void set_log_sink(LogSink sink);
void log_info(const std::string& message);
void log_warning(const std::string& message);

} // namespace protofs
