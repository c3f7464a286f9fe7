// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace jdagg {

// Error families; the CLI maps each family to its exit code
// (usage = 1, input = 2, numeric = 3, compat = 4).
enum class ErrorKind { Usage = 1, Input = 2, Numeric = 3, Compat = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& m) : Error(ErrorKind::Usage, m) {}
};

struct InputError : Error {
  explicit InputError(const std::string& m) : Error(ErrorKind::Input, m) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& m) : Error(ErrorKind::Numeric, m) {}
};

struct CompatError : Error {
  explicit CompatError(const std::string& m) : Error(ErrorKind::Compat, m) {}
};

}  // namespace jdagg
