#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace levybench {

// Invalid distribution / operator / solver parameter.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical routine could not proceed (factorization failure, degenerate input).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, long iteration = -1)
      : std::runtime_error(iteration >= 0 ? what + " (iteration " + std::to_string(iteration) + ")" : what),
        iteration_(iteration) {}
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

class SingularPrecisionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateCalibrationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Malformed dataset or config text. `location` is a byte offset for binary
// containers and a 1-based line number for text formats.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t location)
      : std::runtime_error(what + " (at " + std::to_string(location) + ")"), location_(location) {}
  std::size_t location() const { return location_; }

 private:
  std::size_t location_;
};

class UnsupportedVersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace levybench
