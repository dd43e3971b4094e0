#pragma once

#include <stdexcept>
#include <string>

namespace ofsr {

// File format / I/O problems (bad magic, truncated blobs, unwritable paths).
class data_error : public std::runtime_error {
 public:
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where finite ones are required (NaN loss, Inf gradient).
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ofsr
