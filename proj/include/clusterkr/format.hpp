#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ckr {

/// Locale-independent shortest decimal; parse_double(format_double(v)) == v.
std::string format_double(double v);

/// Strict locale-independent parse of a whole field; throws Error(parse) on
/// trailing garbage, empty input or non-finite values.
double parse_double(std::string_view text);

/// Quote a CSV field if it contains a separator, quote or newline.
std::string csv_escape(std::string_view field);

std::vector<std::string> split(std::string_view text, char sep);

}  // namespace ckr
