#pragma once

#include <stdexcept>
#include <string>

namespace rover_gnc {

// Root of every error thrown by the navigation stack.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class OutOfBoundsError : public Error {
 public:
  using Error::Error;
};

class UnknownCellError : public Error {
 public:
  using Error::Error;
};

// Camera at or below the terrain surface.
class GeometryFault : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

// Caller violated a documented precondition (shape mismatch, sizes).
class ContractError : public Error {
 public:
  using Error::Error;
};

class SingularGeometryError : public Error {
 public:
  using Error::Error;
};

class PathBlockedError : public Error {
 public:
  using Error::Error;
};

class FilterDivergenceError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rover_gnc
