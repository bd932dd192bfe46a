#pragma once

#include <stdexcept>
#include <string>

namespace nqi {

class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file. line() is 1-based, 0 when not tied to a line.
class ParseError : public Error
{
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class InsufficientDataError : public Error
{
public:
    using Error::Error;
};

} // namespace nqi
