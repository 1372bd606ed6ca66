#pragma once

#include <stdexcept>
#include <string>

namespace metalab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Geometry / chart errors
struct OutsideChart : Error { using Error::Error; };
struct OnSurface : Error { using Error::Error; };

// Model / coefficient errors
struct NonInvariantField : Error { using Error::Error; };
struct EllipticityFailure : Error { using Error::Error; };

// Spectral solver errors
struct SingularSolve : Error { using Error::Error; };
struct NoConvergence : Error { using Error::Error; };
struct DegenerateCase : Error { using Error::Error; };
struct NoBracket : Error { using Error::Error; };

// Simulation errors
struct NonFinite : Error { using Error::Error; };

// Experiment errors
struct TooManyTimeouts : Error { using Error::Error; };
struct TimeoutDominated : Error { using Error::Error; };
struct AbsorptionFailure : Error { using Error::Error; };

// Configuration / input errors
struct SchemaError : Error { using Error::Error; };

}  // namespace metalab
