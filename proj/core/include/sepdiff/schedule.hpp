// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sepdiff {

using State = std::vector<double>;

/// Discrete DDPM variance schedule with every derived per-step table
/// precomputed at construction.
///
/// Step indexing: formulas are usually written with t = 1..T. Every API in
/// this library takes the 0-based index `step = t - 1`, so `alpha_bar(step)`
/// is the cumulative product of (1 - beta) over indices 0..step and
/// `alpha_bar_prev(0)` is 1. `sigma(0)` is 0, which makes the last reverse
/// step deterministic.
class NoiseSchedule {
 public:
  /// beta interpolated linearly from beta_min (step 0) to beta_max (step T-1).
  static NoiseSchedule linear(int steps, double beta_min, double beta_max);

  /// Arbitrary per-step betas, each strictly inside (0, 1).
  static NoiseSchedule from_betas(std::vector<double> betas);

  int steps() const noexcept { return static_cast<int>(beta_.size()); }

  double beta(int step) const { return beta_.at(step); }
  double alpha(int step) const { return 1.0 - beta_.at(step); }
  double alpha_bar(int step) const { return alpha_bar_.at(step); }
  double alpha_bar_prev(int step) const { return step == 0 ? 1.0 : alpha_bar_.at(step - 1); }
  double sigma(int step) const { return sigma_.at(step); }

  std::span<const double> betas() const noexcept { return beta_; }
  std::span<const double> alpha_bars() const noexcept { return alpha_bar_; }
  std::span<const double> sigmas() const noexcept { return sigma_; }

  /// Stable 64-bit fingerprint of the beta table (FNV-1a over the bit patterns).
  std::uint64_t hash() const noexcept;

  bool operator==(const NoiseSchedule& other) const { return beta_ == other.beta_; }

 private:
  explicit NoiseSchedule(std::vector<double> betas);

  std::vector<double> beta_;
  std::vector<double> alpha_bar_;
  std::vector<double> sigma_;
};

/// Forward marginal sample: sqrt(alpha_bar) * x0 + sqrt(1 - alpha_bar) * eps.
State noise_to_level(std::span<const double> x0, int step, std::span<const double> eps,
                     const NoiseSchedule& schedule);

}  // namespace sepdiff
