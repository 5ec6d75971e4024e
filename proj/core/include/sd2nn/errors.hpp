#pragma once

#include <stdexcept>
#include <string>

namespace sd2nn {

// Invalid shapes, widths, lambda specs, config fields. CLI maps this to exit 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values during evaluation or training. CLI maps this to exit 3.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// A loss closure touched something the tape cannot differentiate.
struct TapeError : std::runtime_error {
    explicit TapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Degenerate sampling geometry (holes fill the domain).
struct GeometryError : std::runtime_error {
    explicit GeometryError(const std::string& msg) : std::runtime_error(msg) {}
};

// Linear solver failure in the reference solvers.
struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

// Metric preconditions violated (e.g. division by zero in REL).
struct MetricError : std::runtime_error {
    explicit MetricError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sd2nn
