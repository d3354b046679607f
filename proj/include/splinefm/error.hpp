#pragma once

#include <stdexcept>
#include <string>

namespace splinefm {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or construction parameters.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed, missing, or non-finite input data.
class DataError : public Error {
public:
    using Error::Error;
};

/// Numerical breakdown during training or evaluation (NaN loss, etc).
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace splinefm
