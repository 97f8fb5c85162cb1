#pragma once

#include <stdexcept>
#include <string>

namespace advrl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or network dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A call violated an API precondition (wrong tape, step after done, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver ran out of iterations.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity showed up where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint or record could not be read.
class LoadError : public Error {
 public:
  using Error::Error;
};

}  // namespace advrl
