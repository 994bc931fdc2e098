#pragma once

#include <stdexcept>
#include <string>

namespace ragrec {

// Process exit codes used by the CLI: 0 ok, 1 usage, 2 data, 3 backend.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
  virtual int exit_code() const noexcept { return 2; }
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& msg) : Error(msg) {}
  int exit_code() const noexcept override { return 1; }
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(msg) {}
  int exit_code() const noexcept override { return 2; }
};

class BackendError : public Error {
 public:
  explicit BackendError(const std::string& msg) : Error(msg) {}
  int exit_code() const noexcept override { return 3; }
};

}  // namespace ragrec
