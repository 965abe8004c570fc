// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sepdiff/errors.hpp"
#include "sepdiff/guidance.hpp"

namespace sepdiff {

enum class InitMode { kUnified, kIndependent };

std::string to_string(InitMode mode);
InitMode init_mode_from_string(const std::string& s);

struct InitConfig {
  InitMode mode = InitMode::kUnified;
  /// 1-based noise level t* in [1, T]; the state starts at step index t* - 1.
  int t_star = 150;
};

/// K copies of sqrt(ab) y + sqrt(1 - ab) eps at level t_star. Unified mode
/// shares one eps draw across sources; independent draws one per source.
/// t_star = T means no mixture augmentation: the states are eps alone.
std::vector<State> initialize(std::span<const double> y, int t_star, InitMode mode, int K, std::uint64_t seed,
                              const NoiseSchedule& schedule);

/// Closed-form gradient of the Gaussian mixture likelihood p_t(y | sum_k x_k):
/// (sum_k x_k - sqrt(ab) y) / (K (1 - ab)), the same for every source.
State mixture_likelihood_grad(std::span<const State> xt, int step, std::span<const double> y,
                              const NoiseSchedule& schedule);

struct TraceRecord {
  int step = 0;    ///< 0-based step index of the state x_t the gradient was taken at
  int source = 0;  ///< 0-based
  double loss = 0.0;
  double loss_time = 0.0;
  double loss_group = 0.0;
  double loss_stft = 0.0;
  double gamma = 0.0;           ///< 0 when guidance was skipped
  double grad_norm = 0.0;       ///< norm the schedule normalized by
  double guidance_bound = 0.0;  ///< NaN when the conditional gradient vanished
  double x0_energy = 0.0;       ///< |x0_hat|^2
  std::optional<double> si_sdr; ///< of x0_hat against the reference, when given
};

/// Per-step, per-source diagnostics of one separation run.
struct GuidanceTrace {
  std::vector<TraceRecord> records;

  /// CSV with header step,source,loss,loss_time,loss_group,loss_stft,gamma,
  /// grad_norm,guidance_bound,x0_energy[,si_sdr]; doubles printed with 17
  /// significant digits so values round-trip.
  void write_csv(std::ostream& out) const;
  void write_csv(const std::filesystem::path& path) const;
  /// Throws SchemaError for missing columns or malformed rows.
  static GuidanceTrace read_csv(std::istream& in);
  static GuidanceTrace read_csv(const std::filesystem::path& path);
};

struct SeparationProblem {
  std::vector<double> y;
  std::vector<std::shared_ptr<const ScoreModel>> models;
  std::vector<Label> labels;  ///< empty, or one per source
  GuidanceSchedule guidance;
  ReconsLossConfig loss;
  GradientMode mode = GradientMode::kBackprop;
  InitConfig init;
  std::uint64_t seed = 0;
  /// Optional clean references; when present the trace carries per-step SI-SDR.
  std::vector<std::vector<double>> refs;

  /// Throws ConfigError / DimensionError when the invariants do not hold.
  void validate() const;
};

struct SeparationResult {
  std::vector<State> sources;
  GuidanceTrace trace;
  std::vector<double> residual;  ///< y - sum of sources
};

/// Non-finite or runaway state. Carries the step index and the trace so far.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int step, GuidanceTrace trace);
  int step() const noexcept { return step_; }
  const GuidanceTrace& trace() const noexcept { return trace_; }

 private:
  int step_;
  GuidanceTrace trace_;
};

/// Guided reverse DDPM from step t_star - 1 down to 0. At each step every
/// source gets its Tweedie estimate and prior-sampled x'_{t-1}; the
/// reconstruction gradient is taken at x_t and subtracted from x'_{t-1}
/// scaled by the guidance schedule.
SeparationResult separate(const SeparationProblem& problem);

/// Same loop with the closed-form mixture-likelihood gradient
/// (sum_k x_t^k - sqrt(ab) y) / (K (1 - ab)) in place of backpropagation,
/// identical for every source.
SeparationResult separate_analytic(const SeparationProblem& problem);

}  // namespace sepdiff
