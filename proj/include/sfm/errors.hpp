#pragma once

#include <stdexcept>
#include <string>

namespace sfm {

/// Base class for every error thrown by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument shape, index or option.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Input outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data / configuration.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown (failed factorization, loss of definiteness, ...).
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what, long iteration = -1,
                          std::string block = {})
      : Error(decorate(what, iteration, block)),
        message_(what),
        iteration_(iteration),
        block_(std::move(block)) {}

  const std::string& message() const noexcept { return message_; }
  long iteration() const noexcept { return iteration_; }
  const std::string& block() const noexcept { return block_; }

 private:
  static std::string decorate(const std::string& what, long iteration,
                              const std::string& block) {
    std::string out = what;
    if (!block.empty()) out += " [block " + block + "]";
    if (iteration >= 0) out += " [iteration " + std::to_string(iteration) + "]";
    return out;
  }

  std::string message_;
  long iteration_;
  std::string block_;
};

/// Violated internal invariant; indicates a bug rather than bad input.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace sfm
