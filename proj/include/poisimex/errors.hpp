#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace poisimex {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A distribution or configuration parameter is outside its domain.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Wrong number of inputs (too few extrapolation points, indivisible batches, ...).
class ArityError : public Error {
public:
    using Error::Error;
};

/// A documented precondition on the data does not hold.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Input file or schema violation. Carries the offending row/column when known.
class ValidationError : public Error {
public:
    ValidationError(const std::string& what, long row = -1, std::string column = {})
        : Error(what), row_(row), column_(std::move(column)) {}

    long row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    long row_;
    std::string column_;
};

/// Base for numerical failures (exit code 2 in the CLI).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Rank-deficient design or non-invertible system.
class SingularityError : public NumericalError {
public:
    SingularityError(const std::string& what, std::vector<std::string> columns = {})
        : NumericalError(what), columns_(std::move(columns)) {}

    /// Names of the columns found to be collinear with earlier ones.
    const std::vector<std::string>& collinear_columns() const noexcept { return columns_; }

private:
    std::vector<std::string> columns_;
};

/// An iterative procedure stopped without meeting its convergence test.
class ConvergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace poisimex
