#pragma once

#include <stdexcept>
#include <string>

namespace collapse_lab {

/// Raised when inputs violate a documented precondition (bad model, bad
/// config, stability bound exceeded, ...).
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when a numerical procedure fails at run time (step-size underflow,
/// non-finite values, out-of-range fields).
class RuntimeError : public std::runtime_error {
public:
    explicit RuntimeError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace collapse_lab
