#pragma once

#include <stdexcept>
#include <string>

namespace islands {

struct InvalidParameter : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Violated input constraint (volume, boundary values) rather than a bad knob.
struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct EmptyFilm : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolverFailure : std::runtime_error {
  SolverFailure(const std::string& what, long iterations, double residual)
      : std::runtime_error(what), iterations(iterations), residual(residual) {}
  long iterations;
  double residual;
};

struct UndefinedGap : std::domain_error {
  using std::domain_error::domain_error;
};

// Diagnostic does not apply in the current regime (e.g. wetting).
struct NotApplicable : std::domain_error {
  using std::domain_error::domain_error;
};

}  // namespace islands
