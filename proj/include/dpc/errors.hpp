#pragma once

#include <stdexcept>
#include <string>

namespace dpc {

// Bad configuration data (parameter files, invariant violations at setup).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller violated a documented precondition.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Computation-graph misuse (shape mismatch, foreign tape, non-scalar output).
class GraphError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite value produced inside the computation graph.
class NumericFault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite plant state or other unrecoverable simulation failure.
class SimulationFault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dpc
