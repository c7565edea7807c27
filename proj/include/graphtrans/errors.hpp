#pragma once

#include <stdexcept>
#include <string>

namespace graphtrans {

// Shape / dimension mismatches between tensors.
struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Invalid argument values (probabilities out of range, bad labels, empty inputs).
struct ValueError : std::invalid_argument {
    explicit ValueError(const std::string& msg) : std::invalid_argument(msg) {}
};

// A softmax row with every entry masked out.
struct DegenerateRowError : std::runtime_error {
    explicit DegenerateRowError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-deterministic forward detected during gradient checking.
struct DeterminismError : std::runtime_error {
    explicit DeterminismError(const std::string& msg) : std::runtime_error(msg) {}
};

// File loading failures (missing files, parse failures, checkpoint mismatch).
struct LoadError : std::runtime_error {
    explicit LoadError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dataset consistency violations (dangling indices, bad graph ids).
struct IntegrityError : std::runtime_error {
    explicit IntegrityError(const std::string& msg) : std::runtime_error(msg) {}
};

// Configuration schema violations; message carries the offending key path.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace graphtrans
