#pragma once

#include <atomic>
#include <iostream>
#include <string_view>

namespace stance::log {

enum class Level { Debug = 0, Info = 1, Warning = 2, Error = 3, Silent = 4 };

inline std::atomic<Level>& threshold() {
    static std::atomic<Level> level{Level::Info};
    return level;
}

inline void set_level(Level level) { threshold().store(level); }

inline void write(Level level, std::string_view tag, std::string_view message) {
    if (level >= threshold().load()) {
        std::clog << '[' << tag << "] " << message << '\n';
    }
}

inline void debug(std::string_view message) { write(Level::Debug, "debug", message); }
inline void info(std::string_view message) { write(Level::Info, "info", message); }
inline void warn(std::string_view message) { write(Level::Warning, "warn", message); }
inline void error(std::string_view message) { write(Level::Error, "error", message); }

}  // namespace stance::log
