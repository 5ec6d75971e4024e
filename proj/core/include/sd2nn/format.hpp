#pragma once

#include <charconv>
#include <string>

namespace sd2nn {

// Shortest decimal form that parses back to exactly the same double; used by
// config snapshots and CSV writers so reruns produce byte-identical files.
inline std::string format_double(double v) {
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

}  // namespace sd2nn
