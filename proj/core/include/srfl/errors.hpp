#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace srfl {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or inconsistent arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Deployment generation could not satisfy the profile constraints.
class GenerationInfeasible : public Error {
 public:
  using Error::Error;
};

// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Tensor shape mismatch at graph build or run time.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace srfl
