#pragma once

#include <stdexcept>
#include <string>

namespace morsekit {

// Bad inputs: inconsistent dimensions, non-leaf cells, malformed configs.
struct validation_error : std::invalid_argument {
    explicit validation_error(const std::string& msg) : std::invalid_argument(msg) {}
};

// Resource limits: leaf-count cap exceeded.
struct capacity_error : std::runtime_error {
    explicit capacity_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures: Cholesky breakdown after jitter escalation, divergence.
struct numerical_error : std::runtime_error {
    explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace morsekit
