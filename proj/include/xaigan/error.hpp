#pragma once

#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace xaigan {

/// Base of every error thrown by the library. `code()` is a stable,
/// machine-readable identifier (used by the CLI's JSON error report).
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

class ShapeError : public Error {
 public:
  ShapeError(const std::string& where, const Shape& expected, const Shape& actual)
      : Error("shape_mismatch", where + ": expected shape " + shape_str(expected) +
                                    ", got " + shape_str(actual)),
        expected_(expected),
        actual_(actual) {}
  ShapeError(const std::string& where, const std::string& detail)
      : Error("shape_mismatch", where + ": " + detail) {}

  const Shape& expected() const noexcept { return expected_; }
  const Shape& actual() const noexcept { return actual_; }

 private:
  Shape expected_;
  Shape actual_;
};

/// Operation invoked in the wrong lifecycle state (e.g. backward before forward).
class StateError : public Error {
 public:
  explicit StateError(const std::string& message) : Error("invalid_state", message) {}
};

class NumericError : public Error {
 public:
  NumericError(const std::string& where, const std::string& message)
      : Error("non_finite", where + ": " + message), where_(where) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& message)
      : Error("config", key + ": " + message), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class FormatError : public Error {
 public:
  FormatError(std::string code, const std::string& message) : Error(std::move(code), message) {}
};

}  // namespace xaigan
