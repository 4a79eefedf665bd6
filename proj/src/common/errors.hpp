#pragma once

#include <stdexcept>
#include <string>

namespace cf2net {

// User-facing configuration or argument problem.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem / decoding problem.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor or plane dimensions do not match a contract.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values or other numerical breakdown during training.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace cf2net
