#pragma once

#include <stdexcept>
#include <string>

namespace hedgelab {

/// Invalid arguments or configuration (maps to CLI exit code 2).
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure: non-convergence, NaN gradients (CLI exit code 3).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Missing or malformed input data (CLI exit code 4).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace hedgelab
