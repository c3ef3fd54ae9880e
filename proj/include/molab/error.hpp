#pragma once

#include <stdexcept>
#include <string>

namespace molab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad masses, inconsistent grids, unknown keys.
class InvalidInput : public Error {
public:
  using Error::Error;
};

/// A numerical procedure failed to converge or lost accuracy.
class SolverError : public Error {
public:
  using Error::Error;
};

/// The operator has no kinetic term to dominate a Coulomb singularity.
class NonSelfAdjointRisk : public Error {
public:
  using Error::Error;
};

/// Reading or writing a file failed.
class IoError : public Error {
public:
  using Error::Error;
};

} // namespace molab
