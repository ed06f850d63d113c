#pragma once

#include <stdexcept>
#include <string>

namespace sfnet {

// Error taxonomy mirrors the CLI exit codes:
// config/usage -> 1, data -> 2, training -> 3.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Violated precondition (caller bug or impossible request).
struct contract_error : error {
    using error::error;
};

// Filesystem or stream failure.
struct io_error : error {
    using error::error;
};

// Malformed or inconsistent input data.
struct data_error : error {
    using error::error;
};

// Training could not make progress (e.g. diverged to NaN).
struct train_error : error {
    using error::error;
};

// Invalid experiment configuration.
struct config_error : error {
    using error::error;
};

inline void check(bool condition, const std::string& message) {
    if (!condition) {
        throw contract_error(message);
    }
}

}  // namespace sfnet
