#pragma once

#include <stdexcept>
#include <string>

namespace lsq {

// Root of the library's exception hierarchy. The three direct branches map
// onto the CLI exit codes: UsageError -> 1, DataError -> 2, NumericError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Caller passed inconsistent shapes or an argument outside its contract.
class DimensionMismatch final : public UsageError {
 public:
  using UsageError::UsageError;
};

class AlphaOutOfRange final : public UsageError {
 public:
  using UsageError::UsageError;
};

class LeadingTermNonpositive final : public UsageError {
 public:
  using UsageError::UsageError;
};

class RhoTooLarge final : public UsageError {
 public:
  using UsageError::UsageError;
};

class ConditionViolated final : public UsageError {
 public:
  using UsageError::UsageError;
};

class UnsupportedDistribution final : public UsageError {
 public:
  using UsageError::UsageError;
};

class BudgetExceeded final : public UsageError {
 public:
  using UsageError::UsageError;
};

class MissingColumn final : public DataError {
 public:
  using DataError::DataError;
};

class NonFiniteValue final : public DataError {
 public:
  using DataError::DataError;
};

class EmptyAfterDrops final : public DataError {
 public:
  using DataError::DataError;
};

class IoError final : public DataError {
 public:
  using DataError::DataError;
};

class NotPositiveDefinite final : public NumericError {
 public:
  using NumericError::NumericError;
};

class RankCollapse final : public NumericError {
 public:
  using NumericError::NumericError;
};

class RankDeficient final : public NumericError {
 public:
  using NumericError::NumericError;
};

class PivotalRow final : public NumericError {
 public:
  using NumericError::NumericError;
};

class NoConvergence final : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace lsq
