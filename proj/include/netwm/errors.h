#pragma once

#include <stdexcept>
#include <string>

namespace netwm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A value violates an operation's precondition (non-finite entries, bad
/// parameter range, asymmetric covariance, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be Schur stable is not.
class StabilityError : public Error {
 public:
  using Error::Error;
};

/// A controller or observer could not be synthesized.
class SynthesisError : public Error {
 public:
  using Error::Error;
};

/// Some input cannot inject its watermark into some output within p-1 steps.
class ConditionViolation : public SynthesisError {
 public:
  ConditionViolation(int input, int output, const std::string& what)
      : SynthesisError(what), input_(input), output_(output) {}

  /// Zero-based index of the subcontroller whose watermark is invisible.
  int input() const { return input_; }
  /// Zero-based index of the output that does not see it.
  int output() const { return output_; }

 private:
  int input_;
  int output_;
};

/// A detector model is numerically unusable (non-PSD or singular scale).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// A window scatter matrix is singular; the window is too short or the
/// residual is degenerate.
class DegenerateWindowError : public Error {
 public:
  using Error::Error;
};

/// An index or time falls outside the available data.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// An operation was invoked on an object that is not ready for it.
class StateError : public Error {
 public:
  using Error::Error;
};

/// The simulated state left the finite range.
class DivergenceError : public Error {
 public:
  DivergenceError(long step, const std::string& what)
      : Error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

/// A numerical routine failed to meet its own residual check.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace netwm
