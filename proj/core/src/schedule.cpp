// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepdiff/schedule.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "sepdiff/errors.hpp"

namespace sepdiff {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_min, double beta_max) {
  if (steps < 2) throw ConfigError("schedule steps must be >= 2, got " + std::to_string(steps));
  if (!(beta_min > 0.0)) throw ConfigError("beta_min must be > 0, got " + std::to_string(beta_min));
  if (!(beta_max < 1.0)) throw ConfigError("beta_max must be < 1, got " + std::to_string(beta_max));
  if (!(beta_min <= beta_max)) {
    throw ConfigError("beta_min must not exceed beta_max (" + std::to_string(beta_min) + " > " +
                      std::to_string(beta_max) + ")");
  }
  std::vector<double> betas(static_cast<std::size_t>(steps));
  const double span = beta_max - beta_min;
  for (int i = 0; i < steps; ++i) {
    betas[i] = beta_min + span * static_cast<double>(i) / static_cast<double>(steps - 1);
  }
  return NoiseSchedule(std::move(betas));
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  if (betas.size() < 2) throw ConfigError("schedule needs at least 2 steps");
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (!(betas[i] > 0.0 && betas[i] < 1.0)) {
      throw ConfigError("beta[" + std::to_string(i) + "] outside (0, 1)");
    }
  }
  return NoiseSchedule(std::move(betas));
}

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : beta_(std::move(betas)) {
  const std::size_t n = beta_.size();
  alpha_bar_.resize(n);
  sigma_.resize(n);
  double prod = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    prod *= 1.0 - beta_[i];
    alpha_bar_[i] = prod;
  }
  sigma_[0] = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    sigma_[i] = std::sqrt(beta_[i] * (1.0 - alpha_bar_[i - 1]) / (1.0 - alpha_bar_[i]));
  }
}

std::uint64_t NoiseSchedule::hash() const noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  for (double b : beta_) {
    auto bits = std::bit_cast<std::uint64_t>(b);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffu;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

State noise_to_level(std::span<const double> x0, int step, std::span<const double> eps,
                     const NoiseSchedule& schedule) {
  if (x0.size() != eps.size()) {
    throw DimensionError("noise_to_level: x0 has " + std::to_string(x0.size()) +
                         " samples but eps has " + std::to_string(eps.size()));
  }
  if (step < 0 || step >= schedule.steps()) {
    throw ConfigError("noise_to_level: step " + std::to_string(step) + " out of range");
  }
  const double a = std::sqrt(schedule.alpha_bar(step));
  const double b = std::sqrt(1.0 - schedule.alpha_bar(step));
  State out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * eps[i];
  return out;
}

}  // namespace sepdiff
