#include "protofs/core/log.hpp"

#include <iostream>
#include <mutex>

namespace protofs {

namespace {
std::mutex g_sink_mutex;
LogSink g_sink;

void emit(LogLevel level, const std::string& message) {
    std::lock_guard lock(g_sink_mutex);
    if (g_sink) {
        g_sink(level, message);
        return;
    }
    std::cerr << (level == LogLevel::Warning ? "[warning] " : "[info] ") << message << '\n';
}
} // namespace

void set_log_sink(LogSink sink) {
    std::lock_guard lock(g_sink_mutex);
    g_sink = std::move(sink);
}

void log_info(const std::string& message) { emit(LogLevel::Info, message); }
void log_warning(const std::string& message) { emit(LogLevel::Warning, message); }

} // namespace protofs
