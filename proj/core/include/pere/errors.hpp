#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pere {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments: bad indices, mismatched dimensions, out-of-range values.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// An operation was requested in a state that does not support it.
class InvalidState : public Error {
 public:
  using Error::Error;
};

/// No point of the unit hypercube satisfies every cut.
class InfeasibleRegion : public Error {
 public:
  InfeasibleRegion(const std::string& what, std::size_t cut_index, double violation)
      : Error(what), cut_index_(cut_index), violation_(violation) {}

  /// Index (into the cut sequence handed to the solver) of the most violated cut.
  std::size_t cut_index() const noexcept { return cut_index_; }
  double violation() const noexcept { return violation_; }

 private:
  std::size_t cut_index_;
  double violation_;
};

/// A log or division argument left its domain.
class NumericDomainError : public Error {
 public:
  NumericDomainError(const std::string& what, std::size_t row, std::size_t col)
      : Error(what), row_(row), col_(col) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

/// The candidate pool for the next question is empty.
class ExhaustedPool : public Error {
 public:
  using Error::Error;
};

/// Text input could not be parsed; carries the 1-based line number (0 when unknown).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line) : Error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Input parsed but violates the expected schema (column counts, keys, empty files).
class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace pere
