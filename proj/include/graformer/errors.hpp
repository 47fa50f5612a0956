#pragma once

#include <stdexcept>
#include <string>

namespace graformer {

// Violated precondition or invariant of a documented contract.
// The CLI maps this to exit code 1.
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// Filesystem / serialization failure. The CLI maps this to exit code 2.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}

}  // namespace graformer
