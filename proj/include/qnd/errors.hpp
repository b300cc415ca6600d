#pragma once

#include <stdexcept>
#include <string>

namespace qnd {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fock or transmon truncation is too small for the state being represented.
class TruncationError : public Error {
 public:
  using Error::Error;
};

// Norm/trace drift or step-size collapse during time integration.
class IntegrationError : public Error {
 public:
  using Error::Error;
};

// Argument outside the domain of a formula (e.g. zero detuning in the
// dispersive model, mismatched dimensions).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace qnd
