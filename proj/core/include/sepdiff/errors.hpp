// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sepdiff {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameter or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Shape or length mismatch between arrays.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite input or intermediate value.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Class label outside a model's vocabulary.
class LabelError : public Error {
 public:
  using Error::Error;
};

/// Operation the model cannot provide (e.g. an exact Jacobian).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Metric that is mathematically undefined for the given inputs.
class MetricError : public Error {
 public:
  using Error::Error;
};

/// Missing column, wrong layout or count mismatch in a data file.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable input file. `offset` is the byte position of the
/// problem when known, otherwise npos.
class IngestionError : public Error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit IngestionError(const std::string& what, std::size_t offset = npos);
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Training loss became non-finite.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, long step);
  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace sepdiff
