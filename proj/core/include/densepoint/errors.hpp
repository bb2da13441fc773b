#pragma once

#include <stdexcept>
#include <string>

namespace densepoint {

// Every failure raised by the library derives from Error so callers can
// catch one type; the subclasses let the CLI pick an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// Input bytes are not in the expected format (bad JSON, bad magic, short payload).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Input is well-formed but violates a documented precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A configuration cannot be satisfied (e.g. infeasible scene density).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite value.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace densepoint
