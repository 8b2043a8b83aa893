#pragma once

#include <stdexcept>
#include <string>

namespace heatbench {

// Exit-code-relevant error categories (see tools/heatbench.cpp):
// usage errors -> 1, data errors -> 2, training failures -> 3.

class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class TrainError : public std::runtime_error {
 public:
  explicit TrainError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace heatbench
