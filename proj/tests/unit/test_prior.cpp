// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "sepdiff/errors.hpp"
#include "sepdiff/gaussian.hpp"
#include "sepdiff/toy_denoiser.hpp"

using namespace sepdiff;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const NoiseSchedule& standard_schedule() {
  static const NoiseSchedule s = NoiseSchedule::linear(200, 1e-4, 2e-2);
  return s;
}

MatrixXd random_spd(int n, std::mt19937_64& rng) {
  MatrixXd a(n, n);
  std::normal_distribution<double> g;
  for (int i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
  return a * a.transpose() / n + 0.1 * MatrixXd::Identity(n, n);
}

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }
VectorXd to_eigen(const std::vector<double>& v) { return Eigen::Map<const VectorXd>(v.data(), v.size()); }

// Central-difference VJP of the score: v^T d score / dx.
std::vector<double> fd_vjp(const ScoreModel& m, const std::vector<double>& x, int step, const std::vector<double>& v,
                           Label label = std::nullopt, double h = 1e-5) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    out[i] = (oracle::dot(v, m.score(xp, step, label)) - oracle::dot(v, m.score(xm, step, label))) / (2 * h);
  }
  return out;
}

}  // namespace

TEST_CASE("gaussian score closed forms") {
  const auto& s = standard_schedule();
  std::mt19937_64 rng(1);
  const int n = 6;
  const VectorXd mu = to_eigen(oracle::random_vec(n, rng));

  SUBCASE("score vanishes at the scaled mean") {
    const GaussianPrior p(mu, random_spd(n, rng), s);
    for (int t : {0, 50, 199}) {
      const auto sc = p.score(to_std(std::sqrt(s.alpha_bar(t)) * mu), t);
      for (double v : sc) CHECK(std::abs(v) < 1e-12);
    }
  }
  SUBCASE("isotropic prior") {
    const GaussianPrior p(mu, MatrixXd::Identity(n, n), s);
    const auto x = oracle::random_vec(n, rng);
    const auto sc = p.score(x, 120);
    const auto v = oracle::random_vec(n, rng);
    const auto j = p.score_vjp(x, 120, v);
    for (int i = 0; i < n; ++i) {
      CHECK(sc[i] == doctest::Approx(-(x[i] - std::sqrt(s.alpha_bar(120)) * mu[i])).epsilon(1e-12));
      CHECK(j[i] == doctest::Approx(-v[i]).epsilon(1e-12));
    }
  }
  SUBCASE("full covariance against the marginal formula") {
    const MatrixXd cov = random_spd(n, rng);
    const GaussianPrior p(mu, cov, s);
    const auto x = oracle::random_vec(n, rng);
    const double ab = s.alpha_bar(80);
    const MatrixXd St = ab * cov + (1 - ab) * MatrixXd::Identity(n, n);
    const VectorXd want = -St.inverse() * (to_eigen(x) - std::sqrt(ab) * mu);
    const auto got = p.score(x, 80);
    for (int i = 0; i < n; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-10));
  }
}

TEST_CASE("tweedie on a gaussian prior is the exact posterior mean") {
  const auto& s = standard_schedule();
  std::mt19937_64 rng(2);
  const int n = 8;
  const VectorXd mu = to_eigen(oracle::random_vec(n, rng));
  const MatrixXd cov = random_spd(n, rng);
  const GaussianPrior p(mu, cov, s);
  const Eigen::LLT<MatrixXd> llt(cov);
  for (int t : {1, 40, 150, 199}) {
    // Noise a prior sample to level t.
    const VectorXd x0 = mu + llt.matrixL() * to_eigen(oracle::random_vec(n, rng));
    const auto eps = oracle::random_vec(n, rng);
    const auto xt = noise_to_level(to_std(x0), t, eps, s);
    const double ab = s.alpha_bar(t);
    // Linear-Gaussian conditioning: x_t = sqrt(ab) x0 + sqrt(1-ab) e.
    const MatrixXd St = ab * cov + (1 - ab) * MatrixXd::Identity(n, n);
    const VectorXd want = mu + std::sqrt(ab) * cov * St.ldlt().solve(to_eigen(xt) - std::sqrt(ab) * mu);
    const auto got = tweedie_x0(p, xt, t);
    for (int i = 0; i < n; ++i) CHECK(std::abs(got[i] - want[i]) < 1e-10);
  }
}

TEST_CASE("tweedie at step 0 returns nearly the input") {
  const auto s = NoiseSchedule::linear(200, 1e-8, 2e-2);
  std::mt19937_64 rng(4);
  const VectorXd mu = to_eigen(oracle::random_vec(5, rng));
  const GaussianPrior p(mu, MatrixXd::Identity(5, 5), s);
  const auto got = tweedie_x0(p, to_std(mu), 0);
  CHECK(oracle::max_abs_diff(got, to_std(mu)) < 1e-6);
}

TEST_CASE("gmm score against a log-sum-exp oracle") {
  const auto& s = standard_schedule();
  std::vector<GmmPrior::Component> comps;
  comps.push_back({0.3, (VectorXd(2) << 1.0, -0.5).finished(),
                   (MatrixXd(2, 2) << 0.5, 0.1, 0.1, 0.3).finished()});
  comps.push_back({0.7, (VectorXd(2) << -1.5, 2.0).finished(),
                   (MatrixXd(2, 2) << 0.2, -0.05, -0.05, 0.4).finished()});
  const GmmPrior p(comps, s);
  const std::vector<double> w = {0.3, 0.7};
  const std::vector<VectorXd> means = {comps[0].mean, comps[1].mean};
  const std::vector<MatrixXd> covs = {comps[0].covariance, comps[1].covariance};
  for (int t : {0, 30, 100, 199}) {
    for (const auto& x : {std::vector<double>{0.2, 0.4}, std::vector<double>{-1.0, 1.5}, std::vector<double>{3.0, -2.0}}) {
      const VectorXd want = oracle::gmm_score(w, means, covs, to_eigen(x), s.alpha_bar(t));
      const auto got = p.score(x, t);
      CHECK(got[0] == doctest::Approx(want[0]).epsilon(1e-10));
      CHECK(got[1] == doctest::Approx(want[1]).epsilon(1e-10));
    }
  }
}

TEST_CASE("gmm vjp far into one component matches that component") {
  const auto& s = standard_schedule();
  std::vector<GmmPrior::Component> comps;
  const MatrixXd c0 = (MatrixXd(2, 2) << 0.5, 0.1, 0.1, 0.3).finished();
  comps.push_back({0.5, (VectorXd(2) << 5.0, 5.0).finished(), c0});
  comps.push_back({0.5, (VectorXd(2) << -5.0, -5.0).finished(), MatrixXd::Identity(2, 2) * 0.2});
  const GmmPrior p(comps, s);
  const int t = 20;
  const double ab = s.alpha_bar(t);
  const std::vector<double> x = {5.0 * std::sqrt(ab) + 0.1, 5.0 * std::sqrt(ab) - 0.2};
  const std::vector<double> v = {0.3, -1.1};
  const auto got = p.score_vjp(x, t, v);
  const VectorXd want = -(ab * c0 + (1 - ab) * MatrixXd::Identity(2, 2)).inverse() * to_eigen(v);
  CHECK(got[0] == doctest::Approx(want[0]).epsilon(1e-6));
  CHECK(got[1] == doctest::Approx(want[1]).epsilon(1e-6));
  const auto fd = fd_vjp(p, x, t, v);
  CHECK(oracle::rel_l2(got, fd) < 1e-6);
}

TEST_CASE("score vjp matches central differences for every analytic kind") {
  const auto& s = standard_schedule();
  std::mt19937_64 rng(8);
  const int n = 5;
  const GaussianPrior g(to_eigen(oracle::random_vec(n, rng)), random_spd(n, rng), s);
  std::vector<GmmPrior::Component> comps;
  for (int j = 0; j < 3; ++j) comps.push_back({0.2 + j * 0.3, to_eigen(oracle::random_vec(n, rng)), random_spd(n, rng)});
  const GmmPrior m(comps, s);
  for (const ScoreModel* model : {static_cast<const ScoreModel*>(&g), static_cast<const ScoreModel*>(&m)}) {
    for (int probe = 0; probe < 10; ++probe) {
      const int t = static_cast<int>(rng() % 200);
      const auto x = oracle::random_vec(n, rng);
      const auto v = oracle::random_vec(n, rng);
      CHECK(oracle::rel_l2(model->score_vjp(x, t, v), fd_vjp(*model, x, t, v)) < 1e-4);
    }
  }
}

TEST_CASE("analytic prior validation") {
  const auto& s = standard_schedule();
  const VectorXd mu = VectorXd::Zero(3);
  CHECK_THROWS_AS(GaussianPrior(mu, -MatrixXd::Identity(3, 3), s), ConfigError);
  CHECK_THROWS_AS(GaussianPrior(mu, MatrixXd::Identity(2, 2), s), DimensionError);
  const GaussianPrior p(mu, MatrixXd::Identity(3, 3), s);
  CHECK_THROWS_AS(p.score(std::vector<double>{1, 2}, 0), DimensionError);
  CHECK_THROWS_AS(p.score(std::vector<double>{1, std::nan(""), 2}, 0), NumericError);
  CHECK_THROWS_AS(p.score(std::vector<double>{1, 2, 3}, 200), ConfigError);
  CHECK_THROWS_AS(p.score(std::vector<double>{1, 2, 3}, 0, 0), LabelError);
}

TEST_CASE("toy denoiser gradients agree with finite differences") {
  const auto& s = standard_schedule();
  DenoiserTopology topo;
  topo.channels = 4;
  topo.class_count = 2;
  auto model = ToyDenoiser::initialize(topo, s, 21, {"a", "b"});
  // Perturb the zero/small modulation weights so every path carries gradient.
  std::vector<double> params(model.parameters().begin(), model.parameters().end());
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.05);
  for (auto& p : params) p += g(rng);
  const ToyDenoiser m(topo, s, params, {"a", "b"});
  const int n = 32;

  SUBCASE("input vjp") {
    for (int probe = 0; probe < 10; ++probe) {
      const auto x = oracle::random_vec(n, rng);
      const auto v = oracle::random_vec(n, rng);
      const int t = 1 + static_cast<int>(rng() % 199);
      const Label label = probe % 3 == 0 ? Label{} : Label{probe % 2};
      CHECK(oracle::rel_l2(m.score_vjp(x, t, v, label), fd_vjp(m, x, t, v, label)) < 1e-4);
    }
  }
  SUBCASE("parameter gradient") {
    const std::vector<State> noised = {oracle::random_vec(n, rng), oracle::random_vec(n, rng)};
    const std::vector<State> noise = {oracle::random_vec(n, rng), oracle::random_vec(n, rng)};
    const std::vector<int> steps = {17, 160};
    const std::vector<Label> labels = {Label{1}, Label{}};
    std::vector<double> grad;
    m.loss_and_gradient(noised, steps, labels, noise, grad);
    REQUIRE(grad.size() == params.size());
    std::vector<double> dummy;
    int checked = 0;
    for (std::size_t i = 0; i < params.size(); i += 1 + params.size() / 97, ++checked) {
      const double h = 1e-5;
      auto pp = params, pm = params;
      pp[i] += h;
      pm[i] -= h;
      const double lp = ToyDenoiser(topo, s, pp, {"a", "b"}).loss_and_gradient(noised, steps, labels, noise, dummy);
      const double lm = ToyDenoiser(topo, s, pm, {"a", "b"}).loss_and_gradient(noised, steps, labels, noise, dummy);
      const double fd = (lp - lm) / (2 * h);
      CHECK(std::abs(fd - grad[i]) <= 1e-4 * std::max(1e-3, std::abs(fd)));
    }
    CHECK(checked > 90);
  }
  SUBCASE("labels change the score") {
    const auto x = oracle::random_vec(n, rng);
    CHECK(oracle::max_abs_diff(m.score(x, 50, 0), m.score(x, 50, 1)) > 1e-6);
    CHECK_THROWS_AS(m.score(x, 50, 2), LabelError);
  }
  SUBCASE("forward is deterministic and shape preserving") {
    const auto x = oracle::random_vec(n, rng);
    CHECK(m.score(x, 9) == m.score(x, 9));
    CHECK(m.score(x, 9).size() == x.size());
    CHECK_THROWS_AS(m.score(std::vector<double>(30, 0.0), 9), DimensionError);
  }
}

namespace {

std::vector<TrainingExample> sinusoids(int count, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ph(0, 2 * std::numbers::pi);
  std::uniform_real_distribution<double> amp(0.3, 0.6);
  std::vector<TrainingExample> out;
  for (int i = 0; i < count; ++i) {
    std::vector<double> x(n);
    const double p = ph(rng), a = amp(rng);
    for (std::size_t j = 0; j < n; ++j) x[j] = a * std::sin(2 * std::numbers::pi * 8.0 * j / n + p);
    out.push_back({x, std::nullopt});
  }
  return out;
}

}  // namespace

TEST_CASE("toy denoiser training") {
  const auto& s = standard_schedule();
  const auto data = sinusoids(64, 128, 1);
  TrainConfig cfg;
  cfg.steps = 400;
  cfg.crop = 0;
  cfg.topology.channels = 8;
  const auto r = train_denoiser(data, s, cfg, 5);

  CHECK(r.loss_history.size() == 400);
  CHECK(r.final_eval_loss < 0.5 * r.initial_eval_loss);
  CHECK(evaluate_denoiser(r.model, data, cfg, 5) == r.final_eval_loss);

  SUBCASE("bit-reproducible") {
    const auto again = train_denoiser(data, s, cfg, 5);
    CHECK(std::equal(again.model.parameters().begin(), again.model.parameters().end(),
                     r.model.parameters().begin(), r.model.parameters().end()));
  }
  SUBCASE("tweedie recovers a noised sinusoid") {
    const auto clean = sinusoids(1, 128, 99)[0].samples;
    std::mt19937_64 rng(7);
    const auto eps = oracle::random_vec(128, rng);
    const int t = 60;
    const auto x0 = tweedie_x0(r.model, noise_to_level(clean, t, eps, s), t);
    const double corr = oracle::dot(x0, clean) / (oracle::norm(x0) * oracle::norm(clean));
    CHECK(corr > 0.9);
  }
}

TEST_CASE("toy denoiser on an all-zero dataset learns to predict the noise") {
  const auto& s = standard_schedule();
  std::vector<TrainingExample> zeros(8, TrainingExample{std::vector<double>(64, 0.0), std::nullopt});
  TrainConfig cfg;
  cfg.steps = 1500;
  cfg.crop = 0;
  cfg.topology.channels = 4;
  const auto r = train_denoiser(zeros, s, cfg, 2);
  // With x0 = 0 the input is sqrt(1-ab) eps, so eps is recoverable exactly.
  CHECK(r.final_eval_loss < 0.1 * r.initial_eval_loss);
  CHECK(r.final_eval_loss < 0.1);
}

TEST_CASE("training input errors") {
  const auto& s = standard_schedule();
  TrainConfig cfg;
  CHECK_THROWS_AS(train_denoiser({}, s, cfg, 0), ConfigError);
  cfg.crop = 0;
  std::vector<TrainingExample> bad = {{std::vector<double>(64, 0.1), Label{3}}};
  CHECK_THROWS_AS(train_denoiser(bad, s, cfg, 0, {"x"}), LabelError);
  TrainConfig huge = cfg;
  huge.lr = 1e300;
  huge.steps = 50;
  huge.crop = 0;
  const std::vector<TrainingExample> ok(4, TrainingExample{std::vector<double>(64, 0.5), std::nullopt});
  CHECK_THROWS_AS(train_denoiser(ok, s, huge, 0), TrainingError);
}
