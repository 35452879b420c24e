#pragma once

#include <stdexcept>
#include <string>

namespace universim {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// argument outside the mathematical domain (e.g. a quantile level outside (0,1])
struct DomainError : Error {
  using Error::Error;
};

// caller violated an operation's precondition
struct PreconditionError : Error {
  using Error::Error;
};

// malformed input law or chain (masses, row sums, ordering)
struct ValidationError : Error {
  using Error::Error;
};

// exhaustive enumeration would exceed its cap
struct SizeError : Error {
  using Error::Error;
};

// quadrature or root finding failed to reach tolerance
struct NumericError : Error {
  using Error::Error;
};

// requested resolution exceeds double precision
struct PrecisionError : Error {
  using Error::Error;
};

// distance not defined for this pair of distribution classes
struct UnsupportedPairError : Error {
  using Error::Error;
};

}  // namespace universim
