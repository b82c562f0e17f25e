#pragma once

#include <stdexcept>
#include <string>

namespace pbnas {

// Shape of an input disagrees with the space or model it is used with.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class SpaceTooConstrained : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EnumerationTooLarge : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SpaceExhausted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent benchmark data. Carries the 1-based line number
// when the problem comes from a file (0 otherwise).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
          line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class LookupError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class NoRankingSignal : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace pbnas
