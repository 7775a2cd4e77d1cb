#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace mckvlq {

/// Input rejected before any computation ran (bad shapes, violated invariants,
/// malformed config). Maps to CLI exit code 2.
struct InvalidInput : std::runtime_error {
    explicit InvalidInput(const std::string& what) : std::runtime_error(what) {}
};

/// A computation started but could not finish soundly. Maps to CLI exit code 3.
struct NumericFailure : std::runtime_error {
    explicit NumericFailure(const std::string& what) : std::runtime_error(what) {}
};

/// Iteration cap exceeded; carries the best iterate found so far.
struct Nonconvergence : NumericFailure {
    Nonconvergence(const std::string& what, Eigen::VectorXd iterate)
        : NumericFailure(what), best_iterate(std::move(iterate)) {}
    Eigen::VectorXd best_iterate;
};

/// A trajectory left the guarded range before reaching the initial time.
struct FiniteEscape : NumericFailure {
    FiniteEscape(const std::string& what, double when)
        : NumericFailure(what), escape_time(when) {}
    double escape_time;
};

/// A quantity that must stay positive (or finite) did not.
struct InvariantViolation : NumericFailure {
    explicit InvariantViolation(const std::string& what) : NumericFailure(what) {}
};

}  // namespace mckvlq
