#pragma once

#include <stdexcept>
#include <string>

namespace lori {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user input: malformed files, dimension mismatches, invalid arguments,
// degenerate tables rejected at load. CLI maps these to exit code 1.
struct ValidationError : Error {
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// Numeric failure: exp overflow past the configured cap, singular information
// matrix, non-convergence, degenerate offset. CLI maps these to exit code 2.
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace lori
