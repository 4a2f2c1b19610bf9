#pragma once

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>

// Leveled stderr logging controlled by the FEDICU_LOG environment variable
// (error, info, or debug; default info).

namespace fedicu {

enum class LogLevel { error = 0, info = 1, debug = 2 };

inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("FEDICU_LOG");
        if (!env) return LogLevel::info;
        const std::string v(env);
        if (v == "error") return LogLevel::error;
        if (v == "debug") return LogLevel::debug;
        return LogLevel::info;
    }();
    return level;
}

namespace detail {
inline std::mutex& log_mutex() {
    static std::mutex m;
    return m;
}
inline void log_line(const char* tag, const std::string& msg) {
    std::lock_guard<std::mutex> lock(log_mutex());
    std::cerr << "[" << tag << "] " << msg << "\n";
}
}  // namespace detail

inline void log_error(const std::string& msg) { detail::log_line("error", msg); }
inline void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::info) detail::log_line("info", msg);
}
inline void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::debug) detail::log_line("debug", msg);
}

}  // namespace fedicu
