// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sepdiff/schedule.hpp"

namespace sepdiff {

/// Index into a model's class vocabulary; std::nullopt for unconditional use.
using Label = std::optional<int>;

enum class ModelKind { kAnalyticGaussian, kAnalyticGmm, kToyDenoiser };

std::string to_string(ModelKind kind);

/// Score value at a point together with its vector-Jacobian product. The
/// closure may hold intermediate activations, so it is only valid while the
/// Linearization lives.
struct Linearization {
  State score;
  std::function<State(std::span<const double>)> vjp;
};

/// Estimate of grad_x log p_t(x) for one source family.
///
/// Implementations are immutable after construction; every const member is
/// reentrant.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;

  virtual ModelKind kind() const noexcept = 0;
  /// Required state length, or 0 when the model accepts any length.
  virtual std::size_t dim() const noexcept = 0;
  /// Number of class labels; 0 for an unconditional model.
  virtual int class_count() const noexcept { return 0; }
  virtual const NoiseSchedule& schedule() const noexcept = 0;

  /// True when the Jacobian of the score is available in closed form.
  virtual bool has_exact_jacobian() const noexcept { return false; }
  /// True when (d score / dx)^T v can be computed at all.
  virtual bool has_vjp() const noexcept { return false; }

  State score(std::span<const double> x, int step, Label label = std::nullopt) const;
  State score_vjp(std::span<const double> x, int step, std::span<const double> v,
                  Label label = std::nullopt) const;
  /// Score plus a reusable VJP closure; cheaper than separate calls for
  /// models whose VJP needs a forward pass.
  Linearization linearize(std::span<const double> x, int step, Label label = std::nullopt) const;

 protected:
  virtual State score_impl(std::span<const double> x, int step, Label label) const = 0;
  virtual State vjp_impl(std::span<const double> x, int step, std::span<const double> v, Label label) const;
  virtual Linearization linearize_impl(std::span<const double> x, int step, Label label) const;

 private:
  void check_inputs(std::span<const double> x, int step, Label label) const;
};

/// Clean-sample estimate (x + (1 - alpha_bar) * score) / sqrt(alpha_bar).
State tweedie_x0(const ScoreModel& model, std::span<const double> x, int step, Label label = std::nullopt);
/// Same map given an already-evaluated score.
State tweedie_from_score(std::span<const double> x, std::span<const double> score, int step,
                         const NoiseSchedule& schedule);

}  // namespace sepdiff
