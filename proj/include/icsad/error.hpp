#pragma once

#include <stdexcept>
#include <string>

namespace icsad {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated precondition: bad dimension, out-of-range argument, shape mismatch.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. The message names the offending line when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : Error(what) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_ = 0;
};

/// Bad or inconsistent data at the pipeline level (e.g. label length mismatch).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss, solver non-convergence and similar numeric failures.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Strict configuration failure. `key()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(key + ": " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace icsad
