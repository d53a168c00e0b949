#pragma once

#include <stdexcept>
#include <string>

namespace smcl {

// Each error family maps onto one CLI exit code (see tools/smcl_cli.cpp).

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when a feature file was produced by a different input model.
struct StaleFeatureError : DataError {
    using DataError::DataError;
};

}  // namespace smcl
