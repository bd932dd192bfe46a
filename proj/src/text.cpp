#include "nqi/text.hpp"

#include <charconv>
#include <cmath>

#include "nqi/error.hpp"

namespace nqi::text {

std::string format_double(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s)
{
    const auto ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

double parse_double(std::string_view s, std::size_t line)
{
    s = trim(s);
    if (s.empty()) throw ParseError("expected a number, got an empty field", line);
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
        throw ParseError("invalid number '" + std::string(s) + "'", line);
    return v;
}

long long parse_int(std::string_view s, std::size_t line)
{
    s = trim(s);
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ParseError("invalid integer '" + std::string(s) + "'", line);
    return v;
}

std::vector<std::string_view> split_fields(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

CsvReader::CsvReader(std::istream& in, const std::vector<std::string>& expected_header,
                     std::size_t n_optional_tail)
    : in_(in), n_expected_(expected_header.size())
{
    while (std::getline(in_, buf_)) {
        ++line_no_;
        if (trim(buf_).empty()) continue;
        auto fields = split_fields(buf_);
        if (fields.size() > n_expected_ || fields.size() + n_optional_tail < n_expected_)
            throw ParseError("unexpected header column count", line_no_);
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (fields[i] != expected_header[i])
                throw ParseError("unexpected header column '" + std::string(fields[i]) +
                                     "', expected '" + expected_header[i] + "'",
                                 line_no_);
        }
        n_columns_ = fields.size();
        return;
    }
    empty_ = true;
}

bool CsvReader::next(std::vector<std::string_view>& fields)
{
    if (empty_) return false;
    while (std::getline(in_, buf_)) {
        ++line_no_;
        if (trim(buf_).empty()) continue;
        fields = split_fields(buf_);
        if (fields.size() != n_columns_)
            throw ParseError("expected " + std::to_string(n_columns_) + " fields, got " +
                                 std::to_string(fields.size()),
                             line_no_);
        fields.resize(n_expected_);
        return true;
    }
    return false;
}

} // namespace nqi::text
