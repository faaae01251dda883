#pragma once

#include <stdexcept>
#include <string>

namespace smpc {

/// Failure categories surfaced to callers; the CLI maps these onto exit codes.
enum class ErrorKind {
  Config,      ///< malformed or dimensionally inconsistent input
  Infeasible,  ///< a synthesized set came out empty
  Unbounded,   ///< a set required to be bounded is not
  Numerical,   ///< solver breakdown, iteration caps, divergence
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& what)
      : std::runtime_error(module + ": " + what), kind_(kind), module_(std::move(module)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

}  // namespace smpc
