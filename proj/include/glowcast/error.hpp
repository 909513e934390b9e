// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace glowcast {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor or matrix shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN / non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A call violated its documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (sigma, ratios, lengths, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unusable input data file.
class IngestError : public Error {
 public:
  using Error::Error;
};

/// Statistical model fitting failed.
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace glowcast
