#pragma once

#include <stdexcept>
#include <string>

namespace blink {

// Error categories map 1:1 onto CLI exit codes and C API status values.
enum class ErrorKind : int {
  config = 2,
  data = 3,
  numeric = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(std::string msg) : Error(ErrorKind::config, std::move(msg)) {}
};

class DataError : public Error {
 public:
  explicit DataError(std::string msg) : Error(ErrorKind::data, std::move(msg)) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(std::string msg) : Error(ErrorKind::numeric, std::move(msg)) {}
};

}  // namespace blink
