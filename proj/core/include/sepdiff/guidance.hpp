// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sepdiff/prior.hpp"
#include "sepdiff/signal.hpp"

namespace sepdiff {

/// Weights of the composite reconstruction loss
///   lambda_time * |y - y_hat|^2
/// + lambda_group * (sum_n |y_(n) - y_hat_(n)|^2) / N_g
/// + lambda_stft * | |STFT y| - |STFT y_hat| |^2.
/// The STFT in the loss is scaled by 1/sqrt(window_len), which makes the
/// sqrt-Hann transform at hop = window/2 energy preserving, so the three
/// terms share one scale.
/// All-zero weights are accepted and mean "guidance off".
struct ReconsLossConfig {
  double lambda_time = 1.0;
  double lambda_group = 0.05;
  double lambda_stft = 0.1;
  int group_count = 8;
  StftParams stft;

  /// Throws ConfigError for negative weights or group_count < 1.
  void validate() const;
  bool enabled() const noexcept { return lambda_time > 0.0 || lambda_group > 0.0 || lambda_stft > 0.0; }
};

struct LossValue {
  double total = 0.0;
  double time = 0.0;   ///< raw, unweighted
  double group = 0.0;
  double stft = 0.0;
};

/// Signal length must be divisible by group_count (DimensionError), and at
/// least one STFT window when lambda_stft > 0.
LossValue recons_loss(std::span<const double> y, std::span<const double> y_hat, const ReconsLossConfig& config);

/// Gradient of recons_loss(y, y_hat).total with respect to y_hat. The STFT
/// magnitude term uses subgradient 0 at bins where |STFT y_hat| = 0.
std::vector<double> recons_loss_grad(std::span<const double> y, std::span<const double> y_hat,
                                     const ReconsLossConfig& config, LossValue* loss = nullptr);

enum class GradientMode {
  kExactJvp,          ///< closed-form score Jacobian (analytic priors)
  kBackprop,          ///< reverse-mode through the network
  kIdentityJacobian,  ///< drops the score Jacobian: dx0/dx_t = I / sqrt(ab)
  kFiniteDifference,  ///< central differences; reference only, O(N) loss evaluations
};

std::string to_string(GradientMode mode);
GradientMode gradient_mode_from_string(const std::string& s);

/// True when `mode` can be used with `model`.
bool supports(const ScoreModel& model, GradientMode mode) noexcept;

struct ReconsGradient {
  std::vector<State> grads;   ///< d L / d x_t^k
  std::vector<State> scores;  ///< s^k(x_t^k)
  std::vector<State> x0;      ///< Tweedie estimates
  LossValue loss;
};

/// Gradient of L_recons(y, sum_k tweedie_x0(x_t^k)) with respect to every
/// x_t^k, chained through Tweedie:
///   d x0 / d x_t = (I + (1 - ab) J_score) / sqrt(ab).
/// `labels` is empty or has one entry per source. Throws CapabilityError when
/// a model cannot serve `mode`.
ReconsGradient recons_grad(std::span<const State> xt, int step, std::span<const double> y,
                           std::span<const ScoreModel* const> models, std::span<const Label> labels,
                           GradientMode mode, const ReconsLossConfig& config);

enum class GuidanceKind { kConstant, kSigmaProportional, kHybrid };

std::string to_string(GuidanceKind kind);
/// Accepts "constant"/"dps", "dsg"/"sigma-proportional", "hybrid".
GuidanceKind guidance_kind_from_string(const std::string& s);

struct GuidanceSchedule {
  GuidanceKind kind = GuidanceKind::kHybrid;
  double const_value = 1.0;
  double s_floor = 0.002;
  double c = 1000.0;
  /// Normalize by the norm of the concatenated gradient of all sources
  /// instead of each source's own gradient.
  bool joint_norm = false;

  void validate() const;
};

/// (1/c) log(exp(c a) + exp(c b)) evaluated as max + log1p(exp(-c|a-b|)) / c.
double smooth_max(double a, double b, double c);

/// Guidance strength for one step. Normalized kinds return std::nullopt when
/// grad_norm is 0 (the step is skipped).
std::optional<double> gamma(const GuidanceSchedule& schedule, int step, double grad_norm, std::size_t n,
                            const NoiseSchedule& noise);

/// -(g_prior . g_cond) / |g_cond|^2; throws MetricError when g_cond = 0.
double guidance_bound(std::span<const double> g_prior, std::span<const double> g_cond);

}  // namespace sepdiff
