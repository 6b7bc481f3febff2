// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace bat {

/// Bad user configuration (flags, config files, hyperparameter ranges).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data: corpora, checkpoints, logit files.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A NaN/Inf was produced or consumed where finite values are required.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace bat
