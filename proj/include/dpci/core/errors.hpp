#pragma once

#include <stdexcept>
#include <string>

namespace dpci {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shape mismatch between operands.
struct DimensionError : Error {
    using Error::Error;
};

struct IndexError : Error {
    using Error::Error;
};

/// NaN/Inf encountered where finite values are required.
struct NumericError : Error {
    using Error::Error;
};

struct ArgumentError : Error {
    using Error::Error;
};

/// Misuse of the gradient tape (non-scalar loss, backward on a released graph).
struct TapeError : Error {
    using Error::Error;
};

/// Malformed or inconsistent input data (parse errors, bad magic, short sequences).
struct DataError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct UnsupportedError : Error {
    using Error::Error;
};

/// Iterative solver gave up. Carries the last scaling parameter reached.
struct SolverError : Error {
    SolverError(const std::string& what, double last_eps) : Error(what), last_eps(last_eps) {}
    double last_eps;
};

}  // namespace dpci
