#include "srfilter/io.hpp"

#include "srfilter/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace srfilter::io {

std::string format_double(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view token, std::string_view what)
{
    token = trim(token);
    double v = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (!token.empty() && *first == '+')
        ++first;
    auto res = std::from_chars(first, last, v);
    if (token.empty() || res.ec != std::errc() || res.ptr != last)
        throw ParseError("invalid number '" + std::string(token) + "' for " + std::string(what));
    return v;
}

long long parse_int(std::string_view token, std::string_view what)
{
    token = trim(token);
    long long v = 0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (token.empty() || res.ec != std::errc() || res.ptr != token.data() + token.size())
        throw ParseError("invalid integer '" + std::string(token) + "' for " + std::string(what));
    return v;
}

std::vector<std::string_view> split(std::string_view line, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view s)
{
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::vector<double> parse_double_list(std::string_view text, char sep, std::string_view what)
{
    std::vector<double> out;
    text = trim(text);
    if (text.empty())
        return out;
    for (auto tok : split(text, sep)) {
        tok = trim(tok);
        if (tok.empty())
            continue;
        out.push_back(parse_double(tok, what));
    }
    return out;
}

std::string join_doubles(const std::vector<double>& values, char sep)
{
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i)
            out += sep;
        out += format_double(values[i]);
    }
    return out;
}

std::map<std::string, std::string> parse_header_block(std::span<const std::string> lines, std::size_t& pos,
                                                      std::string_view magic, const std::string& where)
{
    if (pos >= lines.size() || trim(lines[pos]) != magic)
        throw ParseError(where + " line " + std::to_string(pos + 1) + ": expected '" + std::string(magic) + "'");
    ++pos;
    std::map<std::string, std::string> out;
    for (; pos < lines.size(); ++pos) {
        auto line = trim(lines[pos]);
        if (line == "end") {
            ++pos;
            return out;
        }
        if (line.empty() || line.front() == '#')
            continue;
        auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ParseError(where + " line " + std::to_string(pos + 1) + ": expected 'key = value'");
        out[std::string(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
    }
    throw ParseError(where + ": header block '" + std::string(magic) + "' is missing its 'end' line");
}

const std::string& require_key(const std::map<std::string, std::string>& block, const std::string& key,
                               const std::string& where)
{
    auto it = block.find(key);
    if (it == block.end())
        throw ParseError(where + ": missing header key '" + key + "'");
    return it->second;
}

std::vector<std::string> read_lines(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError("cannot open '" + path.string() + "' for reading");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

void write_text(const std::filesystem::path& path, const std::string& content)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot open '" + path.string() + "' for writing");
    out << content;
    if (!out)
        throw Error("write to '" + path.string() + "' failed");
}

} // namespace srfilter::io
