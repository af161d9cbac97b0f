#pragma once

#include <stdexcept>
#include <string>

namespace balance {

// Base class for every error raised by the library. Callers that only need
// the 0/2/3 process exit mapping can catch this and ScenarioError.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// chain-core
struct DuplicateConflict : Error {
  using Error::Error;
};
struct GenesisMismatch : Error {
  using Error::Error;
};
struct UnknownBlock : Error {
  using Error::Error;
};

// simnet / attack
struct InvalidConfig : Error {
  using Error::Error;
};
struct TooFewMiners : Error {
  using Error::Error;
};
struct InvalidEpsilon : Error {
  using Error::Error;
};
struct DegenerateAttacker : Error {
  using Error::Error;
};

// analysis
struct WrongK : Error {
  using Error::Error;
};
struct MissingPi : Error {
  using Error::Error;
};
struct TooLarge : Error {
  using Error::Error;
};

// scenario files / CLI input
struct ScenarioError : Error {
  using Error::Error;
};

}  // namespace balance
