#pragma once

#include <stdexcept>
#include <string>

namespace crlmix {

/// Malformed or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Input data that violates the dataset schema (CLI exit code 3).
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown inside a sampler or factorization (CLI exit code 4).
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace crlmix
