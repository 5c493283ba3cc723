#include "exnet/core/log.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <mutex>

namespace exnet {
namespace {

std::mutex g_mutex;
std::ofstream g_file;
LogLevel g_min_level = LogLevel::Info;

const char* level_tag(LogLevel level) {
    switch (level) {
        case LogLevel::Debug: return "DEBUG";
        case LogLevel::Info: return "INFO ";
        case LogLevel::Warning: return "WARN ";
        case LogLevel::Error: return "ERROR";
    }
    return "?????";
}

}  // namespace

void log(LogLevel level, const std::string& message) {
    std::lock_guard<std::mutex> lock(g_mutex);
    if (int(level) < int(g_min_level)) return;
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    localtime_r(&now, &tm);
    char stamp[32];
    std::snprintf(stamp, sizeof(stamp), "%02d:%02d:%02d", tm.tm_hour, tm.tm_min, tm.tm_sec);
    std::fprintf(stderr, "[%s] %s %s\n", stamp, level_tag(level), message.c_str());
    if (g_file.is_open()) {
        g_file << '[' << stamp << "] " << level_tag(level) << ' ' << message << '\n';
        g_file.flush();
    }
}

void log_info(const std::string& message) { log(LogLevel::Info, message); }
void log_warning(const std::string& message) { log(LogLevel::Warning, message); }
void log_error(const std::string& message) { log(LogLevel::Error, message); }

void set_log_file(const std::string& path) {
    std::lock_guard<std::mutex> lock(g_mutex);
    if (g_file.is_open()) g_file.close();
    if (!path.empty()) g_file.open(path, std::ios::app);
}

void set_log_level(LogLevel level) {
    std::lock_guard<std::mutex> lock(g_mutex);
    g_min_level = level;
}

}  // namespace exnet
