#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

// Small CSV and number-formatting helpers shared by the file readers/writers.
namespace nqi::text {

// Shortest decimal string that parses back to the identical double.
std::string format_double(double v);

// Whole-field parse; throws ParseError on trailing garbage or empty input.
double parse_double(std::string_view s, std::size_t line);
long long parse_int(std::string_view s, std::size_t line);

std::string_view trim(std::string_view s);

// Splits one CSV record on commas (no quoting) and trims each field.
std::vector<std::string_view> split_fields(std::string_view line);

class CsvReader
{
public:
    // Reads and checks the header. Columns listed in `optional_tail` may be
    // absent from the end of the header.
    CsvReader(std::istream& in, const std::vector<std::string>& expected_header,
              std::size_t n_optional_tail = 0);

    // Next non-blank record; false at end of input. Fields missing from the
    // optional tail come back as empty views.
    bool next(std::vector<std::string_view>& fields);

    std::size_t line() const { return line_no_; }
    bool empty_input() const { return empty_; }

private:
    std::istream& in_;
    std::string buf_;
    std::size_t line_no_ = 0;
    std::size_t n_columns_ = 0;
    std::size_t n_expected_ = 0;
    bool empty_ = false;
};

} // namespace nqi::text
