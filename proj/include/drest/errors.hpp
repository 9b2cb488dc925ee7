#ifndef DREST_ERRORS_HPP
#define DREST_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace drest {

// Error taxonomy. The CLI maps these onto distinct exit codes, so keep the
// categories stable: schema/input -> ingestion, convergence -> convergence,
// everything else numeric -> numerical.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad user input: malformed model specs, invalid config values.
struct InputError : Error {
  using Error::Error;
};

// CSV ingestion failure; message carries row/column context.
struct IngestError : Error {
  using Error::Error;
};

// Structural mismatch: unknown covariate, wrong design dimension.
struct SchemaError : Error {
  using Error::Error;
};

// Spline knots cannot be formed (too few distinct values, zero spread).
struct DegenerateKnotsError : InputError {
  using InputError::InputError;
};

// Model fit did not reach a stationary point (includes separation).
struct ConvergenceError : Error {
  using Error::Error;
};

// Design matrix rank-deficient on the weighted support.
struct SingularDesignError : Error {
  using Error::Error;
};

// A fitted propensity score reached 0 or 1 numerically.
struct PositivityError : Error {
  using Error::Error;
};

// Outcome bounds invalid or violated.
struct BoundsError : InputError {
  using InputError::InputError;
};

// Bread matrix numerically singular (condition number guard).
struct SingularBreadError : Error {
  using Error::Error;
};

// A precondition on call arguments was violated (missing pseudo-outcomes etc).
struct ContractError : Error {
  using Error::Error;
};

// Targeting step called with an empty exposure arm.
struct EmptyArmError : Error {
  using Error::Error;
};

}  // namespace drest

#endif
