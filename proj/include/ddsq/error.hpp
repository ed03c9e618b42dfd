#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ddsq {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value lies outside the representable range of a hardware word.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Malformed pulse-program text. Carries a 1-based source position.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& msg)
      : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Well-formed program text that violates a timing or range rule.
class SemanticError : public Error {
 public:
  SemanticError(std::size_t line, const std::string& msg)
      : Error("line " + std::to_string(line) + ": " + msg), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

class DeliveryError : public Error {
 public:
  using Error::Error;
};

/// Runtime timeline violation (e.g. a feedback update arriving after its branch point).
class SequencingError : public Error {
 public:
  using Error::Error;
};

/// Bad run manifest. Line 0 marks a whole-file problem.
class ManifestError : public Error {
 public:
  ManifestError(std::size_t line, const std::string& msg)
      : Error(line ? "manifest line " + std::to_string(line) + ": " + msg : "manifest: " + msg), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace ddsq
