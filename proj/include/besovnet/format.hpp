#pragma once

#include <string>
#include <string_view>

namespace besovnet {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

/// Strict parse of a full decimal token; throws std::invalid_argument.
double parse_double(std::string_view token);

}  // namespace besovnet
