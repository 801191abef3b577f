#pragma once

#include <stdexcept>
#include <string>

namespace bhc {

// Bad arguments, malformed files, unsupported scopes. CLI exit code 2.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t row)
      : InputError("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite evaluations, degenerate quadrature. CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

class SolverError : public NumericError {
 public:
  explicit SolverError(const std::string& what) : NumericError(what) {}
};

}  // namespace bhc
