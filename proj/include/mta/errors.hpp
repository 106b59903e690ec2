#pragma once

#include <stdexcept>
#include <string>

namespace mta {

/// Caller supplied something outside an operation's domain.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A similarity matrix entry is negative or non-finite.
class InvalidSimilarity : public InvalidInput {
 public:
  InvalidSimilarity(long row, long col, double value)
      : InvalidInput("invalid similarity entry A(" + std::to_string(row) + "," +
                     std::to_string(col) + ") = " + std::to_string(value) +
                     ": entries must be finite and non-negative"),
        row_(row),
        col_(col) {}

  long row() const noexcept { return row_; }
  long col() const noexcept { return col_; }

 private:
  long row_;
  long col_;
};

/// A guaranteed invariant failed on valid input. Always a bug.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace mta
