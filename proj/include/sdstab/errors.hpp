#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace sdstab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed expression text or system file. `line` is 0 for single-line input.
struct ParseError : Error {
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(format(what, line, column)), message(what), line(line), column(column) {}

  std::string message;
  std::size_t line;
  std::size_t column;

 private:
  static std::string format(const std::string& what, std::size_t line, std::size_t column) {
    std::string loc = line == 0 ? "column " + std::to_string(column)
                                : "line " + std::to_string(line) + ", column " + std::to_string(column);
    return "parse error at " + loc + ": " + what;
  }
};

/// Evaluation outside the domain of an expression (division by zero, ln of a nonpositive value).
struct DomainError : Error {
  DomainError(const std::string& what, std::string subexpression)
      : Error(what + " in '" + subexpression + "'"), subexpression(std::move(subexpression)) {}

  std::string subexpression;
};

struct DimensionError : Error {
  using Error::Error;
};

struct PreconditionError : Error {
  using Error::Error;
};

struct IntegrationError : Error {
  using Error::Error;
};

}  // namespace sdstab
