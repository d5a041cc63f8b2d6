// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wavespec Authors

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wavespec {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible dimensions or lengths (odd length in decimating mode, mismatched blocks, ...).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Coefficient set is missing a block or is otherwise malformed.
class StructureError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an API precondition that cannot be expressed in the type system
/// (stale forward cache, mismatched state).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf where a finite value is required.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

class EvalError : public Error {
 public:
  using Error::Error;
};

}  // namespace wavespec
