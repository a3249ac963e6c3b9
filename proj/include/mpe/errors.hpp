#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mpe {

// Malformed UAI / evidence input. line and offset are 1-based; 0 when unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t offset);

  std::size_t line() const { return line_; }
  std::size_t offset() const { return offset_; }

 private:
  std::size_t line_;
  std::size_t offset_;
};

// A caller broke an operation's precondition (e.g. a move to the current value).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid configuration: empty query set, bad ratios, malformed flags.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SamplingError : public std::runtime_error {
 public:
  SamplingError(std::size_t variable, std::size_t sweep);

  std::size_t variable() const { return variable_; }
  std::size_t sweep() const { return sweep_; }

 private:
  std::size_t variable_;
  std::size_t sweep_;
};

// Scorer weight file is missing a tensor, mis-shaped, truncated, or corrupt.
class WeightFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mpe
