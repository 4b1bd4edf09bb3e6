#pragma once

#include <stdexcept>
#include <string>

namespace ablfield {

enum class ErrorKind {
  validation,
  capacity,
  zero_probability_branch,
  impossible_post_selection,
  contract,
  io,
  invariant,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class CapacityError : public Error {
 public:
  explicit CapacityError(const std::string& what) : Error(ErrorKind::capacity, what) {}
};

/// Raised when a caller asks to collapse onto an outcome of (numerically) zero probability.
class ZeroProbabilityBranchError : public Error {
 public:
  explicit ZeroProbabilityBranchError(const std::string& what)
      : Error(ErrorKind::zero_probability_branch, what) {}
};

/// The post-selected final outcome cannot follow any intermediate outcome: Pr(c|a) = 0.
class ImpossiblePostSelectionError : public Error {
 public:
  explicit ImpossiblePostSelectionError(const std::string& what)
      : Error(ErrorKind::impossible_post_selection, what) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ErrorKind::contract, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& what) : Error(ErrorKind::invariant, what) {}
};

}  // namespace ablfield
