#pragma once

#include <stdexcept>
#include <string>

namespace arrhc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad dimensions, out-of-range indices, malformed arguments.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be Schur stable is not.
class InstabilityError : public Error {
 public:
  using Error::Error;
};

/// A system description violates one of its standing assumptions.
class InvalidSpecError : public Error {
 public:
  using Error::Error;
};

/// Auxiliary rollout requested from a state outside X0.
class InfeasibleSeedError : public Error {
 public:
  using Error::Error;
};

/// The QP solver did not return an optimal solution.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Replay channel used outside its protocol (e.g. replay with empty memory).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// The actuator ran out of buffered inputs: N < s + 1.
class ResilienceViolation : public Error {
 public:
  using Error::Error;
};

/// A certificate constant falls outside its admissible range.
class CertificateInvalid : public Error {
 public:
  using Error::Error;
};

/// No horizon up to the scan cap satisfies the rate condition.
class NotFoundError : public Error {
 public:
  NotFoundError(const std::string& what, double min_rate)
      : Error(what), min_rate_(min_rate) {}
  double min_rate() const noexcept { return min_rate_; }

 private:
  double min_rate_;
};

/// A cost bound was requested where the contraction rate is >= 1.
class NoCertificateError : public Error {
 public:
  using Error::Error;
};

/// The resource-allocation feasible set is empty.
class InfeasibleAllocation : public Error {
 public:
  using Error::Error;
};

}  // namespace arrhc
