#pragma once

#include <stdexcept>
#include <string>

namespace hazard {

// Malformed or out-of-contract input: bad indices, bad file contents,
// sets larger than an enumeration cap, missing columns.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error{what} {}
};

// A computation produced NaN/Inf where the contract forbids it.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error{what} {}
};

}  // namespace hazard
