#pragma once

#include <stdexcept>
#include <string>

namespace livo {

// Caller broke a documented precondition (bad dimension, dt <= 0, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Matrix handed to log_so3 is not a rotation within tolerance.
class InvalidRotation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A factorization failed even after regularization.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed dataset, config or trajectory file. Carries the 1-based line
// number when one is known (0 otherwise).
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace livo
