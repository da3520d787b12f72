#pragma once

#include <iostream>
#include <string_view>

namespace vrstc {

inline bool& verbose_logging() {
    static bool enabled = true;
    return enabled;
}

inline void log_info(std::string_view message) {
    if (verbose_logging()) std::clog << "[vrstc] " << message << '\n';
}

inline void log_warning(std::string_view message) { std::clog << "[vrstc] warning: " << message << '\n'; }

} // namespace vrstc
