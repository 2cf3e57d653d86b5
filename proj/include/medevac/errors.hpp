#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace medevac {

/// Malformed input document. `path` is a JSON-pointer-like location.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string path, const std::string& what)
      : std::runtime_error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Well-formed input that breaks a domain invariant.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string invariant, const std::string& what)
      : std::runtime_error(invariant + ": " + what), invariant_(std::move(invariant)) {}
  const std::string& invariant() const noexcept { return invariant_; }

 private:
  std::string invariant_;
};

/// A caller broke an operation's precondition (e.g. stepping with an illegal action).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// No exchange action (not even direct flight) can serve the request.
class InfeasibleRequest : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace medevac
