#pragma once

#include <stdexcept>
#include <string>

namespace acp {

// Structural validation failure (bad request fields, bad policy values).
// Distinct from a DENIED decision: a validation failure never produces a result.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// A state backend call failed. Callers on the decision path fail closed.
class StoreError : public std::runtime_error {
 public:
  explicit StoreError(const std::string& what) : std::runtime_error(what) {}
};

// Value cannot be canonically serialized (floating point, null, binary).
class CanonicalError : public std::invalid_argument {
 public:
  explicit CanonicalError(const std::string& what) : std::invalid_argument(what) {}
};

// Malformed input file (policy, vector suite, ledger). Not a test failure.
class LoadError : public std::runtime_error {
 public:
  explicit LoadError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace acp
