#pragma once

#include <stdexcept>
#include <string>

namespace eatk {

/// Failure categories. The numeric values double as the CLI exit codes.
enum class ErrorKind : int {
  config = 1,
  data = 2,
  training = 3,
  evaluation = 4,
  sampler = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

/// Unreadable files, malformed lines, unknown identifiers.
struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

struct ParseError : DataError {
  ParseError(const std::string& path, std::size_t line, const std::string& why)
      : DataError(path + ":" + std::to_string(line) + ": " + why), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct LookupError : DataError {
  using DataError::DataError;
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct TrainingError : Error {
  TrainingError(const std::string& what, int epoch)
      : Error(ErrorKind::training, what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

struct EvaluationError : Error {
  explicit EvaluationError(const std::string& what) : Error(ErrorKind::evaluation, what) {}
};

struct SamplerError : Error {
  SamplerError(const std::string& what, std::size_t shortfall)
      : Error(ErrorKind::sampler, what), shortfall_(shortfall) {}
  std::size_t shortfall() const noexcept { return shortfall_; }

 private:
  std::size_t shortfall_;
};

}  // namespace eatk
