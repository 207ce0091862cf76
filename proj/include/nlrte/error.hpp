#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace nlrte {

// Invalid input: bad parameters, shape mismatches, violated preconditions.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// An iterative solver exhausted its iteration cap. Carries the residual
// history so callers can report it.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::vector<double> trace)
        : std::runtime_error(what), trace_(std::move(trace)) {}

    const std::vector<double>& trace() const noexcept { return trace_; }

private:
    std::vector<double> trace_;
};

}  // namespace nlrte
