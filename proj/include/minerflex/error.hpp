#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace minerflex {

// Base of every error the library throws. The CLI maps the subclasses onto
// exit codes (validation = 2, numerical = 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed arguments: empty fleets, out-of-range indices, bad dimensions.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Input is well-formed but violates a modelling assumption (e.g. r_k < 0).
class ModelViolation : public Error {
 public:
  using Error::Error;
};

// Requested deployment exceeds what the fleet can shed.
class InfeasibleDeployment : public Error {
 public:
  using Error::Error;
};

class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace minerflex
