#pragma once

#include <stdexcept>
#include <string>

namespace densewarp {

//! Base class for all errors thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

//! Mismatched lengths, incompatible grids, values violating a type invariant.
class StructuralError : public Error {
 public:
  using Error::Error;
};

//! Inputs that are well-formed but carry no usable information
//! (empty sample sets, constant samples, zero-mass densities).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

//! Arguments outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

//! Invalid knobs: basis sizes, fold counts, optimizer settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace densewarp
