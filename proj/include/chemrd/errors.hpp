#pragma once

#include <stdexcept>
#include <string>

namespace chemrd {

// Base class for every failure this library raises on purpose.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A coefficient, state, or grid violated a structural requirement.
struct model_error : error {
    using error::error;
};

// Non-finite or out-of-domain value met while evaluating an operation.
struct evaluation_error : error {
    using error::error;
};

// An injection schedule left the admissible box.
struct admissibility_error : error {
    using error::error;
};

// Configuration file missing, malformed, or inconsistent.
struct config_error : error {
    using error::error;
};

} // namespace chemrd
