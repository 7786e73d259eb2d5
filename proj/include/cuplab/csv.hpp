#pragma once

#include <cstdio>
#include <string>
#include <vector>

namespace cuplab::csv {

/// 17 significant digits, C locale.
inline std::string real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string flag(bool v) { return v ? "1" : "0"; }

inline std::string join(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) out += ',';
        out += fields[i];
    }
    return out;
}

}  // namespace cuplab::csv
