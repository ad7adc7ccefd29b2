#pragma once

#include <stdexcept>
#include <string>

namespace irmap {

/// Input data that violates a documented precondition or file contract.
/// The command-line tool maps these to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure during model training (non-finite loss, empty stage).
class TrainingError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace irmap
