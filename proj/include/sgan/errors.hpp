#pragma once

#include <stdexcept>
#include <string>

namespace sgan {

/// Base class for all library errors. The CLI maps the three subclasses onto
/// exit codes 1 (usage), 2 (data) and 3 (numerical).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments or preconditions supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Missing, malformed or inconsistent files and values.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values encountered during a computation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace sgan
