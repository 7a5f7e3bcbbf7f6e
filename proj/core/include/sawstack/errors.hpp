#pragma once

#include <stdexcept>
#include <string>

namespace sawstack {

// Bad user input: malformed files, violated invariants, out-of-range arguments.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure inside a solver (non-convergence, singular systems).
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

// Isolated trial point where the partial-wave eigenproblem is degenerate.
// Root searches step over these by perturbing the trial velocity.
class DegenerateEvaluation : public SolverError {
public:
    explicit DegenerateEvaluation(const std::string& msg) : SolverError(msg) {}
};

}  // namespace sawstack
