// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sepdiff/guidance.hpp"
#include "sepdiff/separator.hpp"
#include "sepdiff/toy_denoiser.hpp"

namespace sepdiff::cli {

/// Everything a command needs, read from one JSON file and overridden by
/// flags. The resolved form is written next to every command's outputs.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir;
  int jobs = 1;

  struct Schedule {
    int steps = 200;
    double beta_min = 1e-4;
    double beta_max = 2e-2;
  } schedule;

  struct Prior {
    /// "toy-denoiser" (checkpoints), "analytic-gaussian" or "analytic-gmm" (inline parameters).
    std::string kind = "toy-denoiser";
    std::vector<std::string> checkpoints;
    std::vector<std::optional<std::string>> labels;
    /// Per source: {"mean": [...], "variance": [...]} or {"mean", "covariance": [[...]]};
    /// for GMMs {"components": [{"weight", "mean", "variance"|"covariance"}, ...]}.
    nlohmann::json analytic = nlohmann::json::array();
  } prior;

  struct Training {
    std::string dataset_dir;
    std::size_t signal_length = 64000;
    TrainConfig train;
    std::vector<std::string> class_vocab;  ///< filled from dataset subdirectories
  } training;

  struct Guidance {
    GuidanceSchedule schedule;
    ReconsLossConfig loss;
    GradientMode mode = GradientMode::kBackprop;
    bool analytic = false;  ///< closed-form likelihood gradient baseline
  } guidance;

  InitConfig init;

  std::string mixture_manifest;
  std::string mixture_dir;
  std::string est_dir;
  std::string ref_dir;
};

nlohmann::json to_json(const RunConfig& c);
/// Missing keys keep their defaults; unknown keys are ConfigErrors.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
void write_run_config(const std::filesystem::path& path, const RunConfig& c);

NoiseSchedule make_schedule(const RunConfig& c);

}  // namespace sepdiff::cli
