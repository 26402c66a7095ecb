#pragma once

#include <stdexcept>

namespace paff {

/// Input or data-validation problem. The CLI maps this to exit code 2.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numerical failure (non-finite loss, diverged solve). CLI exit code 3.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace paff
