#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace groundcheck {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A trace record could not be decoded (bad JSON, missing or mistyped field).
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A decoded value violates a domain invariant.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, std::string id, const std::string& what)
      : Error(id.empty() ? what : what + " (id=" + id + ")"),
        field_(std::move(field)),
        id_(std::move(id)) {}
  explicit ValidationError(const std::string& what) : Error(what) {}

  const std::string& field() const noexcept { return field_; }
  const std::string& id() const noexcept { return id_; }

 private:
  std::string field_;
  std::string id_;
};

/// Numeric failure: degenerate data, an optimizer that did not converge.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, double gradient_norm)
      : NumericError(what + " (final gradient norm " + std::to_string(gradient_norm) + ")"),
        gradient_norm_(gradient_norm) {}
  double gradient_norm() const noexcept { return gradient_norm_; }

 private:
  double gradient_norm_;
};

}  // namespace groundcheck
