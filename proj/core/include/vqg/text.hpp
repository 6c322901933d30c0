#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace vqg {

std::string_view trim(std::string_view s) noexcept;

// Lowercase (ASCII), trim, and collapse internal whitespace runs to one space.
// "Roll  Paper " -> "roll paper".
std::string normalize_label(std::string_view s);

// Strict decimal parsers: the whole (trimmed) field must be consumed.
std::optional<int> parse_int(std::string_view s) noexcept;
std::optional<long long> parse_int64(std::string_view s) noexcept;
std::optional<double> parse_double(std::string_view s) noexcept;

// Shortest representation that parses back to the same double.
std::string format_double(double v);

}  // namespace vqg
