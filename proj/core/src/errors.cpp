// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepdiff/errors.hpp"

namespace sepdiff {

namespace {

std::string with_offset(const std::string& what, std::size_t offset) {
  if (offset == IngestionError::npos) return what;
  return what + " (at byte " + std::to_string(offset) + ")";
}

}  // namespace

IngestionError::IngestionError(const std::string& what, std::size_t offset)
    : Error(with_offset(what, offset)), offset_(offset) {}

TrainingError::TrainingError(const std::string& what, long step)
    : Error(what + " (training step " + std::to_string(step) + ")"), step_(step) {}

}  // namespace sepdiff
