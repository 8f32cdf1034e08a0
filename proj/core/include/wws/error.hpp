#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace wws {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PlantError : public Error {
 public:
  enum class Kind { NonFiniteState, Divergence, StepSizeUnderflow, InvalidArgument, NewtonFailure };

  PlantError(Kind kind, const std::string& what, std::optional<std::size_t> index = std::nullopt)
      : Error(what), kind_(kind), index_(index) {}

  Kind kind() const noexcept { return kind_; }
  /// Failing trajectory step or dataset column, when the error came from a batch call.
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  Kind kind_;
  std::optional<std::size_t> index_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t position)
      : Error(msg + " at position " + std::to_string(position)), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class StlError : public Error {
 public:
  using Error::Error;
};

class OptimizerError : public Error {
 public:
  using Error::Error;
};

class PredictorError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace wws
