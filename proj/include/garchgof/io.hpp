#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "garchgof/errors.hpp"

namespace garchgof::io {

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline bool parse_double(std::string_view s, double& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

}  // namespace detail

/// Single-column CSV: one observation per line. A non-numeric first line is
/// taken as a header; blank lines are skipped.
inline std::vector<double> read_series(std::istream& is) {
    std::vector<double> out;
    std::string line;
    std::size_t line_no = 0;
    bool first_content = true;
    while (std::getline(is, line)) {
        ++line_no;
        const auto cell = detail::trim(line);
        if (cell.empty()) continue;
        double v = 0.0;
        const bool ok = detail::parse_double(cell, v);
        if (!ok && first_content) {
            first_content = false;
            continue;
        }
        first_content = false;
        if (!ok) throw InputError("line " + std::to_string(line_no) + ": not a number: '" + std::string(cell) + "'");
        if (!std::isfinite(v)) throw InputError("line " + std::to_string(line_no) + ": non-finite value");
        out.push_back(v);
    }
    if (out.empty()) throw InputError("series file contains no observations");
    return out;
}

inline std::vector<double> read_series(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open '" + path + "'");
    return read_series(is);
}

inline void write_series(std::ostream& os, const std::vector<double>& y) {
    char buf[32];
    for (double v : y) {
        const auto res = std::to_chars(buf, buf + sizeof buf, v);
        os.write(buf, res.ptr - buf);
        os.put('\n');
    }
}

}  // namespace garchgof::io
