#pragma once

#include <charconv>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

namespace ranklab {

/// Shortest decimal representation that round-trips the exact double.
/// Used for every number we persist, so that reload == original bit for bit.
inline std::string format_double(double value) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

/// Strict double parse: the whole token must be consumed.
inline double parse_double(std::string_view token, const std::string& context) {
    double value = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{} || res.ptr != last) {
        throw std::runtime_error(context + ": not a number: '" + std::string(token) + "'");
    }
    return value;
}

inline long long parse_integer(std::string_view token, const std::string& context) {
    long long value = 0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{} || res.ptr != last) {
        throw std::runtime_error(context + ": not an integer: '" + std::string(token) + "'");
    }
    return value;
}

}  // namespace ranklab
