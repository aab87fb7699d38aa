#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace recon::csv {

// Splits one record. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_line(std::string_view line);

// Quotes a text field when it contains a comma, quote or leading/trailing space.
std::string quote(std::string_view field);

// Shortest representation that parses back to the same double.
std::string format_double(double v);

// Fixed-point with the given number of decimals.
std::string format_fixed(double v, int decimals);

std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

// Reads all lines of a file, stripping trailing '\r'. Throws DataError when the
// file cannot be opened.
std::vector<std::string> read_lines(const std::string& path);

}  // namespace recon::csv
