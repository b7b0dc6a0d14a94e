#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace srfilter::io {

// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

// Strict parse of the full token; throws ParseError with `what` in the message.
double parse_double(std::string_view token, std::string_view what);
long long parse_int(std::string_view token, std::string_view what);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

std::vector<double> parse_double_list(std::string_view text, char sep, std::string_view what);
std::string join_doubles(const std::vector<double>& values, char sep);

// "key = value" lines up to a terminating "end" line, starting at lines[pos]
// (which must equal `magic`). Advances pos past "end".
std::map<std::string, std::string> parse_header_block(std::span<const std::string> lines, std::size_t& pos,
                                                      std::string_view magic, const std::string& where);
const std::string& require_key(const std::map<std::string, std::string>& block, const std::string& key,
                               const std::string& where);

// Reads all lines (LF; a trailing CR is stripped). Throws ParseError naming the
// path when the file cannot be opened.
std::vector<std::string> read_lines(const std::filesystem::path& path);

// Writes `content` atomically enough for our purposes: truncate + write + check.
void write_text(const std::filesystem::path& path, const std::string& content);

} // namespace srfilter::io
