// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepdiff/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sepdiff/errors.hpp"

namespace sepdiff {

void ReconsLossConfig::validate() const {
  if (!(lambda_time >= 0.0) || !(lambda_group >= 0.0) || !(lambda_stft >= 0.0)) {
    throw ConfigError("reconstruction loss weights must be non-negative");
  }
  if (group_count < 1) throw ConfigError("group_count must be >= 1");
  if (lambda_stft > 0.0) check_cola(stft);
}

namespace {

void check_pair(std::span<const double> y, std::span<const double> y_hat, const ReconsLossConfig& config) {
  config.validate();
  if (y.size() != y_hat.size()) {
    throw DimensionError("reconstruction loss: lengths differ (" + std::to_string(y.size()) + " vs " +
                         std::to_string(y_hat.size()) + ")");
  }
  if (y.size() % static_cast<std::size_t>(config.group_count) != 0) {
    throw DimensionError("signal length " + std::to_string(y.size()) + " is not divisible into " +
                         std::to_string(config.group_count) + " groups");
  }
}

}  // namespace

LossValue recons_loss(std::span<const double> y, std::span<const double> y_hat, const ReconsLossConfig& config) {
  check_pair(y, y_hat, config);
  LossValue v;
  const std::size_t seg = y.size() / static_cast<std::size_t>(config.group_count);
  for (int g = 0; g < config.group_count; ++g) {
    double acc = 0.0;
    for (std::size_t i = g * seg; i < (g + 1) * seg; ++i) acc += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    v.time += acc;
  }
  v.group = v.time / config.group_count;
  if (config.lambda_stft > 0.0) {
    const Spectrogram a = stft(y, config.stft);
    const Spectrogram b = stft(y_hat, config.stft);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      const double d = std::abs(a.data[i]) - std::abs(b.data[i]);
      v.stft += d * d;
    }
    v.stft /= config.stft.window_len;
  }
  v.total = config.lambda_time * v.time + config.lambda_group * v.group + config.lambda_stft * v.stft;
  return v;
}

std::vector<double> recons_loss_grad(std::span<const double> y, std::span<const double> y_hat,
                                     const ReconsLossConfig& config, LossValue* loss) {
  check_pair(y, y_hat, config);
  const double wt = 2.0 * (config.lambda_time + config.lambda_group / config.group_count);
  std::vector<double> grad(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) grad[i] = wt * (y_hat[i] - y[i]);
  LossValue v;
  if (loss != nullptr) {
    for (std::size_t i = 0; i < y.size(); ++i) v.time += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    v.group = v.time / config.group_count;
  }
  if (config.lambda_stft > 0.0) {
    const Spectrogram a = stft(y, config.stft);
    Spectrogram b = stft(y_hat, config.stft);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      const double ma = std::abs(a.data[i]);
      const double mb = std::abs(b.data[i]);
      v.stft += (ma - mb) * (ma - mb);
      b.data[i] = mb > 0.0 ? -2.0 * config.lambda_stft / config.stft.window_len * (ma - mb) / mb * b.data[i] : 0.0;
    }
    v.stft /= config.stft.window_len;
    const auto g = stft_adjoint(b, y.size());
    for (std::size_t i = 0; i < y.size(); ++i) grad[i] += g[i];
  }
  if (loss != nullptr) {
    v.total = config.lambda_time * v.time + config.lambda_group * v.group + config.lambda_stft * v.stft;
    *loss = v;
  }
  return grad;
}

std::string to_string(GradientMode mode) {
  switch (mode) {
    case GradientMode::kExactJvp: return "exact-jvp";
    case GradientMode::kBackprop: return "backprop";
    case GradientMode::kIdentityJacobian: return "identity-jacobian";
    case GradientMode::kFiniteDifference: return "finite-difference";
  }
  return "unknown";
}

GradientMode gradient_mode_from_string(const std::string& s) {
  for (auto m : {GradientMode::kExactJvp, GradientMode::kBackprop, GradientMode::kIdentityJacobian,
                 GradientMode::kFiniteDifference}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown gradient mode '" + s + "'");
}

bool supports(const ScoreModel& model, GradientMode mode) noexcept {
  switch (mode) {
    case GradientMode::kExactJvp: return model.has_exact_jacobian();
    case GradientMode::kBackprop: return model.has_vjp();
    case GradientMode::kIdentityJacobian:
    case GradientMode::kFiniteDifference: return true;
  }
  return false;
}

ReconsGradient recons_grad(std::span<const State> xt, int step, std::span<const double> y,
                           std::span<const ScoreModel* const> models, std::span<const Label> labels,
                           GradientMode mode, const ReconsLossConfig& config) {
  const std::size_t K = xt.size();
  if (K == 0 || models.size() != K) throw DimensionError("recons_grad: need one model per source");
  if (!labels.empty() && labels.size() != K) throw DimensionError("recons_grad: need one label per source");
  const NoiseSchedule& schedule = models[0]->schedule();
  for (std::size_t k = 0; k < K; ++k) {
    if (!(models[k]->schedule() == schedule)) throw ConfigError("all models must share one noise schedule");
    if (xt[k].size() != y.size()) throw DimensionError("recons_grad: source length differs from mixture");
    if (!supports(*models[k], mode)) {
      throw CapabilityError(to_string(models[k]->kind()) + " does not support gradient mode " + to_string(mode));
    }
  }
  auto label_of = [&](std::size_t k) { return labels.empty() ? Label{} : labels[k]; };
  const double ab = schedule.alpha_bar(step);
  const double sab = std::sqrt(ab);

  ReconsGradient out;
  std::vector<Linearization> lins(K);
  const bool need_vjp = mode == GradientMode::kExactJvp || mode == GradientMode::kBackprop;
  for (std::size_t k = 0; k < K; ++k) {
    if (need_vjp) {
      lins[k] = models[k]->linearize(xt[k], step, label_of(k));
      out.scores.push_back(lins[k].score);
    } else {
      out.scores.push_back(models[k]->score(xt[k], step, label_of(k)));
    }
    out.x0.push_back(tweedie_from_score(xt[k], out.scores[k], step, schedule));
  }
  std::vector<double> y_hat(y.size(), 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t i = 0; i < y.size(); ++i) y_hat[i] += out.x0[k][i];
  }
  const std::vector<double> g = recons_loss_grad(y, y_hat, config, &out.loss);

  out.grads.resize(K);
  if (mode == GradientMode::kFiniteDifference) {
    for (std::size_t k = 0; k < K; ++k) {
      State& grad = out.grads[k];
      grad.resize(y.size());
      State probe = xt[k];
      std::vector<double> yp(y.size());
      auto loss_at = [&]() {
        const State x0 = tweedie_x0(*models[k], probe, step, label_of(k));
        for (std::size_t i = 0; i < y.size(); ++i) yp[i] = y_hat[i] - out.x0[k][i] + x0[i];
        return recons_loss(y, yp, config).total;
      };
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double h = 1e-5 * std::max(1.0, std::abs(xt[k][i]));
        probe[i] = xt[k][i] + h;
        const double lp = loss_at();
        probe[i] = xt[k][i] - h;
        const double lm = loss_at();
        probe[i] = xt[k][i];
        grad[i] = (lp - lm) / (2.0 * h);
      }
    }
    return out;
  }
  for (std::size_t k = 0; k < K; ++k) {
    State& grad = out.grads[k];
    grad.assign(g.begin(), g.end());
    if (need_vjp) {
      const State jv = lins[k].vjp(g);
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += (1.0 - ab) * jv[i];
    }
    for (double& v : grad) v /= sab;
  }
  return out;
}

std::string to_string(GuidanceKind kind) {
  switch (kind) {
    case GuidanceKind::kConstant: return "constant";
    case GuidanceKind::kSigmaProportional: return "dsg";
    case GuidanceKind::kHybrid: return "hybrid";
  }
  return "unknown";
}

GuidanceKind guidance_kind_from_string(const std::string& s) {
  if (s == "constant" || s == "dps") return GuidanceKind::kConstant;
  if (s == "dsg" || s == "sigma-proportional") return GuidanceKind::kSigmaProportional;
  if (s == "hybrid") return GuidanceKind::kHybrid;
  throw ConfigError("unknown guidance schedule '" + s + "'");
}

void GuidanceSchedule::validate() const {
  if (!std::isfinite(const_value) || const_value < 0.0) throw ConfigError("const_value must be finite and >= 0");
  if (!(s_floor > 0.0)) throw ConfigError("s_floor must be > 0");
  if (!(c > 0.0)) throw ConfigError("SmoothMax sharpness c must be > 0");
}

double smooth_max(double a, double b, double c) {
  return std::max(a, b) + std::log1p(std::exp(-c * std::abs(a - b))) / c;
}

std::optional<double> gamma(const GuidanceSchedule& schedule, int step, double grad_norm, std::size_t n,
                            const NoiseSchedule& noise) {
  if (schedule.kind == GuidanceKind::kConstant) return schedule.const_value;
  if (!(grad_norm > 0.0)) return std::nullopt;
  const double sigma = noise.sigma(step);
  const double level =
      schedule.kind == GuidanceKind::kHybrid ? smooth_max(sigma, schedule.s_floor, schedule.c) : sigma;
  return level * std::sqrt(static_cast<double>(n)) / grad_norm;
}

double guidance_bound(std::span<const double> g_prior, std::span<const double> g_cond) {
  if (g_prior.size() != g_cond.size()) throw DimensionError("guidance_bound: vector lengths differ");
  double dot = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < g_cond.size(); ++i) {
    dot += g_prior[i] * g_cond[i];
    nn += g_cond[i] * g_cond[i];
  }
  if (!(nn > 0.0)) throw MetricError("guidance bound undefined for a zero conditional gradient");
  return -dot / nn;
}

}  // namespace sepdiff
