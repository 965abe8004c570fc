// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sepdiff/toy_denoiser.hpp"

namespace sepdiff {

/// On-disk layout:
///   "SDCK" | u32 header bytes | JSON header | u64 parameter count | float64[count]
/// All integers little-endian. The header always carries "format" and
/// "param_count"; everything else is owner-defined.
struct Checkpoint {
  std::string header_json;
  std::vector<double> params;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws IngestionError on truncation, bad magic or a count mismatch.
Checkpoint read_checkpoint(const std::filesystem::path& path);

void save_denoiser(const std::filesystem::path& path, const ToyDenoiser& model);
/// Rebuilds the model and its schedule. When `expected` is given the stored
/// schedule hash must match it (ConfigError otherwise).
ToyDenoiser load_denoiser(const std::filesystem::path& path, const NoiseSchedule* expected = nullptr);

}  // namespace sepdiff
