#pragma once

// Minimal leveled logger writing to stderr. Verbosity comes from the
// FED_HIRE_LOG environment variable (error|info|debug, default error).

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>

namespace fedhire::log {

enum class Level { error = 0, info = 1, debug = 2 };

inline Level level_from_string(std::string_view s) {
    if (s == "debug") return Level::debug;
    if (s == "info") return Level::info;
    return Level::error;
}

namespace detail {
inline Level& current() {
    static Level lvl = [] {
        const char* env = std::getenv("FED_HIRE_LOG");
        return env ? level_from_string(env) : Level::error;
    }();
    return lvl;
}
inline std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}
inline const char* tag(Level l) {
    switch (l) {
        case Level::error: return "error";
        case Level::info: return "info";
        case Level::debug: return "debug";
    }
    return "?";
}
}  // namespace detail

inline void set_level(Level l) { detail::current() = l; }
inline Level level() { return detail::current(); }
inline bool enabled(Level l) { return static_cast<int>(l) <= static_cast<int>(detail::current()); }

template <typename... Args>
void write(Level l, const Args&... args) {
    if (!enabled(l)) return;
    std::ostringstream os;
    os << "[fedhire:" << detail::tag(l) << "] ";
    (os << ... << args);
    os << '\n';
    std::lock_guard lock(detail::sink_mutex());
    std::cerr << os.str();
}

template <typename... Args> void error(const Args&... args) { write(Level::error, args...); }
template <typename... Args> void info(const Args&... args) { write(Level::info, args...); }
template <typename... Args> void debug(const Args&... args) { write(Level::debug, args...); }

}  // namespace fedhire::log
