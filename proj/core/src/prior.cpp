// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepdiff/prior.hpp"

#include <cmath>
#include <string>

#include "sepdiff/errors.hpp"

namespace sepdiff {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kAnalyticGaussian: return "analytic-gaussian";
    case ModelKind::kAnalyticGmm: return "analytic-gmm";
    case ModelKind::kToyDenoiser: return "toy-denoiser";
  }
  return "unknown";
}

void ScoreModel::check_inputs(std::span<const double> x, int step, Label label) const {
  if (dim() != 0 && x.size() != dim()) {
    throw DimensionError("score model expects " + std::to_string(dim()) + " values, got " +
                         std::to_string(x.size()));
  }
  if (step < 0 || step >= schedule().steps()) {
    throw ConfigError("step " + std::to_string(step) + " outside schedule of " +
                      std::to_string(schedule().steps()) + " steps");
  }
  if (label) {
    if (class_count() == 0) throw LabelError("model is unconditional but a class label was given");
    if (*label < 0 || *label >= class_count()) {
      throw LabelError("class label " + std::to_string(*label) + " not in vocabulary of size " +
                       std::to_string(class_count()));
    }
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) throw NumericError("non-finite score input at index " + std::to_string(i));
  }
}

State ScoreModel::score(std::span<const double> x, int step, Label label) const {
  check_inputs(x, step, label);
  return score_impl(x, step, label);
}

State ScoreModel::score_vjp(std::span<const double> x, int step, std::span<const double> v, Label label) const {
  check_inputs(x, step, label);
  if (v.size() != x.size()) throw DimensionError("score_vjp: v and x lengths differ");
  if (!has_vjp()) throw CapabilityError(to_string(kind()) + " does not provide Jacobian products");
  return vjp_impl(x, step, v, label);
}

Linearization ScoreModel::linearize(std::span<const double> x, int step, Label label) const {
  check_inputs(x, step, label);
  return linearize_impl(x, step, label);
}

State ScoreModel::vjp_impl(std::span<const double>, int, std::span<const double>, Label) const {
  throw CapabilityError(to_string(kind()) + " does not provide Jacobian products");
}

Linearization ScoreModel::linearize_impl(std::span<const double> x, int step, Label label) const {
  Linearization lin;
  lin.score = score_impl(x, step, label);
  if (has_vjp()) {
    State point(x.begin(), x.end());
    lin.vjp = [this, point = std::move(point), step, label](std::span<const double> v) {
      return vjp_impl(point, step, v, label);
    };
  }
  return lin;
}

State tweedie_from_score(std::span<const double> x, std::span<const double> score, int step,
                         const NoiseSchedule& schedule) {
  if (x.size() != score.size()) throw DimensionError("tweedie: score and state lengths differ");
  const double ab = schedule.alpha_bar(step);
  const double inv = 1.0 / std::sqrt(ab);
  State out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] + (1.0 - ab) * score[i]) * inv;
  return out;
}

State tweedie_x0(const ScoreModel& model, std::span<const double> x, int step, Label label) {
  return tweedie_from_score(x, model.score(x, step, label), step, model.schedule());
}

}  // namespace sepdiff
