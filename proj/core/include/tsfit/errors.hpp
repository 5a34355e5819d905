#pragma once

#include <stdexcept>
#include <string>

namespace tsfit {

/// Invalid argument supplied by the caller (bad knots, unknown cell id, ...).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A structural invariant of the spline space was violated, e.g. a parameter
/// point that no basis function covers.
class StructuralError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Numerical breakdown of the least-squares solve.
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& what, int iteration = -1)
        : std::runtime_error(what), iteration_(iteration) {}

    /// Driver iteration (1-based) at which the solve failed, or -1 if unknown.
    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

/// Point-cloud ingestion failure; the message carries file and line context.
class LoadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The point cloud cannot be mapped onto a parametric rectangle.
class ParametrizationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace tsfit
