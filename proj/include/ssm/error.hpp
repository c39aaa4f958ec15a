#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ssm {

// Base of every error raised by the toolkit. Callers that only care about
// success/failure catch this; the subclasses carry the context.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularMatrix : public Error {
 public:
  explicit SingularMatrix(std::string what_block)
      : Error("singular matrix: " + what_block), block_(std::move(what_block)) {}
  const std::string& block() const noexcept { return block_; }

 private:
  std::string block_;
};

// Failures inside a recursion carry the 1-based step at which they happened.
class StepError : public Error {
 public:
  StepError(const std::string& msg, std::size_t step)
      : Error(msg + " at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class SingularInnovation : public StepError {
 public:
  using StepError::StepError;
};

class SingularProcessNoise : public Error {
 public:
  using Error::Error;
};

class SingularMeasurementNoise : public Error {
 public:
  using Error::Error;
};

class SingularTransition : public Error {
 public:
  using Error::Error;
};

class FusionFailure : public StepError {
 public:
  using StepError::StepError;
};

class ParamArity : public Error {
 public:
  using Error::Error;
};

class InvalidModel : public Error {
 public:
  using Error::Error;
};

class UnsupportedModel : public Error {
 public:
  using Error::Error;
};

class InvalidPopulation : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DataError : public ParseError {
 public:
  using ParseError::ParseError;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

}  // namespace ssm
