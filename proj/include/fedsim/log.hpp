#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace fedsim::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

inline Level threshold() {
    static const Level level = [] {
        const char* env = std::getenv("FEDSIM_LOG");
        if (!env) return Level::warn;
        const std::string v(env);
        if (v == "error") return Level::error;
        if (v == "warn") return Level::warn;
        if (v == "info") return Level::info;
        if (v == "debug") return Level::debug;
        return Level::warn;
    }();
    return level;
}

template <typename... Args>
void emit(Level lvl, const char* tag, const char* fmt, Args... args) {
    if (lvl > threshold()) return;
    std::fprintf(stderr, "[fedsim %s] ", tag);
    std::fprintf(stderr, fmt, args...);
    std::fprintf(stderr, "\n");
}

template <typename... Args>
void error(const char* fmt, Args... args) {
    emit(Level::error, "error", fmt, args...);
}
template <typename... Args>
void warn(const char* fmt, Args... args) {
    emit(Level::warn, "warn", fmt, args...);
}
template <typename... Args>
void info(const char* fmt, Args... args) {
    emit(Level::info, "info", fmt, args...);
}
template <typename... Args>
void debug(const char* fmt, Args... args) {
    emit(Level::debug, "debug", fmt, args...);
}

}  // namespace fedsim::log
