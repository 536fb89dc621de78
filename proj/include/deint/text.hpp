#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace deint {

/// Shortest decimal text that parses back to exactly `value`. NaN is
/// written as "NA" and infinities as "inf" / "-inf".
std::string format_number(double value);

/// Parses text written by format_number (or any decimal number). Throws
/// InvalidArgument on malformed input.
double parse_number(std::string_view text);

/// Splits one CSV line on commas; no quoting is supported.
std::vector<std::string_view> split_csv_line(std::string_view line);

std::string_view trim(std::string_view s);

}  // namespace deint
