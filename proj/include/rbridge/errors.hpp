#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rbridge {

/// Invalid arguments or configuration (CLI exit code 1).
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Non-finite states, failed solves, degenerate weights (CLI exit code 2).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure attributed to a specific integration step.
class StepError : public NumericalError {
public:
    StepError(const std::string& what, std::size_t step)
        : NumericalError(what + " (step " + std::to_string(step) + ")"), step_(step) {}
    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

/// File system and parse failures (CLI exit code 3).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace rbridge
