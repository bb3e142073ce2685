#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace itdre {

/// Bad argument at an API boundary (non-finite data, shape mismatch, ...).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Invalid configuration (splits, grids, CLI config keys).
class InvalidConfig : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A kernel order without a closed form in this library.
class UnsupportedOrder : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Median pairwise distance is zero.
class DegenerateBandwidth : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Factorization or conditioning failure in a dense solve.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite objective or gradient met during a line search.
class LineSearchFailure : public std::runtime_error {
public:
    LineSearchFailure(const std::string& what, int iteration, int cg_iteration)
        : std::runtime_error(what), iteration_(iteration), cg_iteration_(cg_iteration) {}

    /// Outer (Tikhonov) iteration, 1-based.
    int iteration() const noexcept { return iteration_; }
    int cg_iteration() const noexcept { return cg_iteration_; }

private:
    int iteration_;
    int cg_iteration_;
};

/// Every grid point of a hyperparameter search failed.
class SelectionFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// All ensemble importance weights are zero.
class DegenerateWeights : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed input file. Carries the file and 1-based data row (0 = header/file level).
class ParseError : public std::runtime_error {
public:
    enum class Kind { io, missing_column, shape_mismatch, non_finite, bad_value, unmatched_id, negative_weight };

    ParseError(Kind kind, std::string file, std::size_t row, const std::string& detail);

    Kind kind() const noexcept { return kind_; }
    const std::string& file() const noexcept { return file_; }
    std::size_t row() const noexcept { return row_; }

private:
    Kind kind_;
    std::string file_;
    std::size_t row_;
};

const char* to_string(ParseError::Kind kind);

}  // namespace itdre
