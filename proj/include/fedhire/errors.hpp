#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedhire {

/// Bad caller input: shape mismatch, out-of-range parameter, non-finite value.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation was requested on a cluster that has no members.
class UndefinedCluster : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Malformed input file. Row and column are 1-based; 0 means "not applicable".
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::size_t row, std::size_t column)
        : std::runtime_error(message), row_(row), column_(column) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

/// The federation as a whole could not produce a result.
class ExperimentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace fedhire
