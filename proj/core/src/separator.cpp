// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepdiff/separator.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "sepdiff/metrics.hpp"

namespace sepdiff {

std::string to_string(InitMode mode) { return mode == InitMode::kUnified ? "unified" : "independent"; }

InitMode init_mode_from_string(const std::string& s) {
  if (s == "unified") return InitMode::kUnified;
  if (s == "independent") return InitMode::kIndependent;
  throw ConfigError("unknown init mode '" + s + "'");
}

std::vector<State> initialize(std::span<const double> y, int t_star, InitMode mode, int K, std::uint64_t seed,
                              const NoiseSchedule& schedule) {
  if (t_star < 1 || t_star > schedule.steps()) {
    throw ConfigError("t_star " + std::to_string(t_star) + " outside [1, " + std::to_string(schedule.steps()) + "]");
  }
  if (K < 1) throw ConfigError("source count must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::vector<State> out;
  State eps(y.size());
  for (int k = 0; k < K; ++k) {
    if (k == 0 || mode == InitMode::kIndependent) {
      for (auto& e : eps) e = gauss(rng);
    }
    // t_star = T is the conventional start from pure noise, without the mixture term.
    out.push_back(t_star == schedule.steps() ? eps : noise_to_level(y, t_star - 1, eps, schedule));
  }
  return out;
}

State mixture_likelihood_grad(std::span<const State> xt, int step, std::span<const double> y,
                              const NoiseSchedule& schedule) {
  if (xt.empty()) throw ConfigError("no source states");
  const double ab = schedule.alpha_bar(step);
  const double scale = 1.0 / (static_cast<double>(xt.size()) * (1.0 - ab));
  State g(y.size());
  for (std::size_t n = 0; n < y.size(); ++n) {
    double sx = 0.0;
    for (const auto& x : xt) {
      if (x.size() != y.size()) throw DimensionError("source state length differs from mixture");
      sx += x[n];
    }
    g[n] = (sx - std::sqrt(ab) * y[n]) * scale;
  }
  return g;
}

DivergenceError::DivergenceError(const std::string& what, int step, GuidanceTrace trace)
    : Error(what + " (step " + std::to_string(step) + ")"), step_(step), trace_(std::move(trace)) {}

void SeparationProblem::validate() const {
  if (models.size() < 2) throw ConfigError("separation needs at least two sources");
  if (y.empty()) throw DimensionError("empty mixture");
  for (double v : y) {
    if (!std::isfinite(v)) throw NumericError("mixture contains non-finite samples");
  }
  const NoiseSchedule& s = models.front()->schedule();
  for (const auto& m : models) {
    if (!m) throw ConfigError("null score model");
    if (!(m->schedule() == s)) throw ConfigError("all source models must share one noise schedule");
    if (m->dim() != 0 && m->dim() != y.size()) {
      throw DimensionError("model dimension " + std::to_string(m->dim()) + " differs from mixture length " +
                           std::to_string(y.size()));
    }
  }
  if (!labels.empty() && labels.size() != models.size()) throw ConfigError("need one label per source");
  if (!refs.empty()) {
    if (refs.size() != models.size()) throw ConfigError("need one reference per source");
    for (const auto& r : refs) {
      if (r.size() != y.size()) throw DimensionError("reference length differs from mixture");
    }
  }
  if (init.t_star < 1 || init.t_star > s.steps()) {
    throw ConfigError("t_star must lie in [1, " + std::to_string(s.steps()) + "]");
  }
  guidance.validate();
  loss.validate();
}

namespace {

double norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

// Shared reverse loop; `analytic` swaps the backpropagated gradient for the
// closed-form Gaussian mixture-likelihood gradient.
SeparationResult run(const SeparationProblem& p, bool analytic) {
  p.validate();
  const auto K = p.models.size();
  const std::size_t N = p.y.size();
  const NoiseSchedule& sched = p.models.front()->schedule();
  std::vector<const ScoreModel*> raw;
  for (const auto& m : p.models) raw.push_back(m.get());
  auto label_of = [&](std::size_t k) { return p.labels.empty() ? Label{} : p.labels[k]; };

  SeparationResult res;
  std::vector<State> x = initialize(p.y, p.init.t_star, p.init.mode, static_cast<int>(K), p.seed, sched);
  std::mt19937_64 rng(p.seed ^ 0x9E3779B97F4A7C15ULL);
  std::normal_distribution<double> gauss;
  const double y_norm = norm(p.y);
  const double limit = 1e6 * (y_norm > 0.0 ? y_norm : std::sqrt(static_cast<double>(N)));

  for (int i = p.init.t_star - 1; i >= 0; --i) {
    const double ab = sched.alpha_bar(i);
    const double ab_prev = sched.alpha_bar_prev(i);
    const double c1 = std::sqrt(sched.alpha(i)) * (1.0 - ab_prev) / (1.0 - ab);
    const double c2 = std::sqrt(ab_prev) * sched.beta(i) / (1.0 - ab);
    const double sig = sched.sigma(i);

    ReconsGradient rg;
    if (analytic) {
      for (std::size_t k = 0; k < K; ++k) {
        rg.scores.push_back(raw[k]->score(x[k], i, label_of(k)));
        rg.x0.push_back(tweedie_from_score(x[k], rg.scores[k], i, sched));
      }
      std::vector<double> y_hat(N, 0.0);
      for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t n = 0; n < N; ++n) y_hat[n] += rg.x0[k][n];
      }
      rg.loss = recons_loss(p.y, y_hat, p.loss);
      const State g = mixture_likelihood_grad(x, i, p.y, sched);
      rg.grads.assign(K, g);
    } else {
      rg = recons_grad(x, i, p.y, raw, p.labels, p.mode, p.loss);
    }

    // Prior sampling.
    std::vector<State> next(K, State(N));
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t n = 0; n < N; ++n) {
        const double e = sig > 0.0 ? gauss(rng) : 0.0;
        next[k][n] = c1 * x[k][n] + c2 * rg.x0[k][n] + sig * e;
      }
    }

    // Guidance.
    std::vector<double> norms(K);
    double joint = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      norms[k] = norm(rg.grads[k]);
      joint += norms[k] * norms[k];
    }
    joint = std::sqrt(joint);
    const bool active = analytic || p.loss.enabled();
    for (std::size_t k = 0; k < K; ++k) {
      TraceRecord rec;
      rec.step = i;
      rec.source = static_cast<int>(k);
      rec.loss = rg.loss.total;
      rec.loss_time = rg.loss.time;
      rec.loss_group = rg.loss.group;
      rec.loss_stft = rg.loss.stft;
      rec.grad_norm = p.guidance.joint_norm ? joint : norms[k];
      const std::optional<double> gm = active ? gamma(p.guidance, i, rec.grad_norm, N, sched) : std::nullopt;
      rec.gamma = gm.value_or(0.0);
      if (rec.gamma != 0.0) {
        for (std::size_t n = 0; n < N; ++n) next[k][n] -= rec.gamma * rg.grads[k][n];
      }
      if (norms[k] > 0.0) {
        double dot = 0.0;
        for (std::size_t n = 0; n < N; ++n) dot += rg.scores[k][n] * rg.grads[k][n];
        rec.guidance_bound = dot / (norms[k] * norms[k]);  // g_cond = -grad
      } else {
        rec.guidance_bound = std::numeric_limits<double>::quiet_NaN();
      }
      double e = 0.0;
      for (double v : rg.x0[k]) e += v * v;
      rec.x0_energy = e;
      if (!p.refs.empty()) rec.si_sdr = si_sdr(rg.x0[k], p.refs[k]);
      res.trace.records.push_back(rec);
    }

    for (std::size_t k = 0; k < K; ++k) {
      const double nk = norm(next[k]);
      if (!std::isfinite(nk)) throw DivergenceError("non-finite state in source " + std::to_string(k), i, res.trace);
      if (nk > limit) throw DivergenceError("state norm of source " + std::to_string(k) + " exceeded guard", i, res.trace);
    }
    x = std::move(next);
  }

  res.sources = std::move(x);
  res.residual = p.y;
  for (const auto& s : res.sources) {
    for (std::size_t n = 0; n < N; ++n) res.residual[n] -= s[n];
  }
  return res;
}

}  // namespace

SeparationResult separate(const SeparationProblem& problem) { return run(problem, false); }

SeparationResult separate_analytic(const SeparationProblem& problem) { return run(problem, true); }

}  // namespace sepdiff
