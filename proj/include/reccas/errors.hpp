#pragma once

#include <stdexcept>
#include <string>

namespace reccas {

// Input files or records that violate the data contract (exit code 2).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Bad CLI flags / unusable invocation (exit code 1).
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure (divergence, non-finite state) that aborts a run (exit code 3).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace reccas
