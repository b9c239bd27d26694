#pragma once

#include <stdexcept>
#include <string>

namespace pttag {

// Every error raised by the library derives from Error. exit_code() is the
// process exit status the CLI reports for it.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 2; }
};

// Usage and configuration problems: bad ratios, bad policy files, bad flags.
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 1; }
};

class PolicyError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Problems with input data.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public DataError {
 public:
  explicit SchemaError(std::string field, const std::string& context = {})
      : DataError("missing or invalid field \"" + field + "\"" +
                  (context.empty() ? "" : " (" + context + ")")),
        field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class IntegrityError : public DataError {
 public:
  using DataError::DataError;
};

class InsufficientDataError : public DataError {
 public:
  using DataError::DataError;
};

class UndefinedMetricError : public DataError {
 public:
  using DataError::DataError;
};

class AlignmentError : public DataError {
 public:
  using DataError::DataError;
};

class BudgetTooSmallError : public DataError {
 public:
  using DataError::DataError;
};

class TrainingError : public DataError {
 public:
  using DataError::DataError;
};

class DivergenceError : public TrainingError {
 public:
  DivergenceError(int epoch, const std::string& what)
      : TrainingError("epoch " + std::to_string(epoch) + ": " + what),
        epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

// Scorer files that cannot be read, sidecars that cannot be reached.
class BackendError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

}  // namespace pttag
