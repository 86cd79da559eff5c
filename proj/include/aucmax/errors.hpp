#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace aucmax {

//! Model specification is malformed (empty, bad output width, zero dims).
struct SpecError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

//! Operand shapes disagree.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

//! A call violates a documented precondition (empty batch, one class only, ...).
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

//! An argument lies outside the mathematical domain of the operation.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

//! Non-finite values appeared during optimization.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

//! CSV ingestion failure. Row and column are 1-based; row 1 is the header.
class IngestionError : public std::runtime_error {
public:
  IngestionError(const std::string &what, std::size_t row = 0,
                 std::size_t column = 0)
      : std::runtime_error(what), row_(row), column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

private:
  std::size_t row_;
  std::size_t column_;
};

//! Checkpoint could not be read back (version, truncation, shape, invariant).
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

//! Bad experiment configuration or config file.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

} // namespace aucmax
