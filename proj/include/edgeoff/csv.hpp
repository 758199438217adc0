#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace edgeoff::csv {

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s);

std::vector<std::string> split_line(std::string_view line);

/// Joins fields with commas and a trailing newline. Fields are written
/// verbatim; callers only emit numbers and identifiers.
std::string join_row(const std::vector<std::string>& fields);

/// Writes `content` to `path`, throwing std::runtime_error on failure.
void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace edgeoff::csv
