#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "resure/errors.hpp"

namespace resure {

// Shortest round-trip decimal form of a double. Every CSV/JSON number we
// write goes through this so that rereading a report reproduces the exact
// bits (replay audits compare with ==).
inline std::string fmt_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ValueError("not a number: '" + std::string(s) + "'");
    }
    return v;
}

inline std::int64_t parse_int(std::string_view s) {
    std::int64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ValueError("not an integer: '" + std::string(s) + "'");
    }
    return v;
}

// FNV-1a, used for config hashes embedded in every output file.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

// Percentile by linear interpolation between closest ranks: rank
// p/100*(n-1) over the sorted values. Matches the rule used for the batch
// weight floor and for weight-distribution summaries.
inline double percentile(std::vector<double> values, double p) {
    if (values.empty()) {
        throw EmptyInputError("percentile of empty list");
    }
    if (!(p >= 0.0 && p <= 100.0)) {
        throw ValueError("percentile must lie in [0,100], got " + fmt_double(p));
    }
    std::sort(values.begin(), values.end());
    if (values.size() == 1) return values[0];
    const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(rank);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = rank - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

inline double mean_of(std::span<const double> xs) {
    if (xs.empty()) throw EmptyInputError("mean of empty list");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

}  // namespace resure
