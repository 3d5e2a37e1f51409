#pragma once

#include <stdexcept>
#include <string>

namespace dilo {

// Error taxonomy, one class per CLI exit code (see tools/dilo_main.cpp).
// Precondition violations on library calls use std::invalid_argument directly.

// Bad or missing config keys, out-of-range values, schema violations. Exit 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Missing files or unreadable/unwritable paths. Exit 3.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed dataset contents, dimension mismatches, empty samplers. Exit 4.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training abort: |V| blew past the divergence threshold. Exit 5.
struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite intermediate values outside of training divergence. Exit 1.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dilo
