#include "idcanvas/log.hpp"

#include <atomic>
#include <mutex>

namespace idcanvas {

namespace {
std::atomic<int> g_level{static_cast<int>(LogLevel::Info)};
std::mutex g_mutex;
constexpr const char* kNames[] = {"debug", "info", "warn", "error"};
}  // namespace

LogLevel log_level() { return static_cast<LogLevel>(g_level.load()); }
void set_log_level(LogLevel level) { g_level = static_cast<int>(level); }

void log(LogLevel level, const std::string& msg) {
    if (static_cast<int>(level) < g_level.load() || level == LogLevel::Silent) return;
    std::lock_guard<std::mutex> lock(g_mutex);
    std::clog << "[idcanvas:" << kNames[static_cast<int>(level)] << "] " << msg << "\n";
}

}  // namespace idcanvas
