// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepdiff/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sepdiff/errors.hpp"

namespace sepdiff {

namespace {

void decompose_spd(const Eigen::MatrixXd& cov, Eigen::MatrixXd& vecs, Eigen::VectorXd& vals) {
  if (cov.rows() != cov.cols() || cov.rows() == 0) throw ConfigError("covariance must be square and non-empty");
  if (!cov.isApprox(cov.transpose(), 1e-12)) throw ConfigError("covariance is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw ConfigError("covariance is not positive-definite");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  vecs = es.eigenvectors();
  vals = es.eigenvalues();
  if (vals.minCoeff() <= 0.0) throw ConfigError("covariance is not positive-definite");
}

Eigen::VectorXd as_vector(std::span<const double> x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

State to_state(const Eigen::VectorXd& v) { return State(v.data(), v.data() + v.size()); }

}  // namespace

GaussianPrior::GaussianPrior(Eigen::VectorXd mean, Eigen::MatrixXd covariance, NoiseSchedule schedule)
    : mean_(std::move(mean)), cov_(std::move(covariance)), schedule_(std::move(schedule)) {
  if (cov_.rows() != mean_.size()) throw DimensionError("mean and covariance sizes differ");
  decompose_spd(cov_, eigvecs_, eigvals_);
}

GaussianPrior GaussianPrior::diagonal(Eigen::VectorXd mean, const Eigen::VectorXd& variances,
                                      NoiseSchedule schedule) {
  return GaussianPrior(std::move(mean), variances.asDiagonal().toDenseMatrix(), std::move(schedule));
}

Eigen::VectorXd GaussianPrior::apply_precision(const Eigen::VectorXd& v, int step) const {
  const double ab = schedule_.alpha_bar(step);
  Eigen::VectorXd z = eigvecs_.transpose() * v;
  z.array() /= ab * eigvals_.array() + (1.0 - ab);
  return eigvecs_ * z;
}

State GaussianPrior::score_impl(std::span<const double> x, int step, Label) const {
  const double root_ab = std::sqrt(schedule_.alpha_bar(step));
  return to_state(-apply_precision(as_vector(x) - root_ab * mean_, step));
}

State GaussianPrior::vjp_impl(std::span<const double>, int step, std::span<const double> v, Label) const {
  return to_state(-apply_precision(as_vector(v), step));
}

GmmPrior::GmmPrior(std::vector<Component> components, NoiseSchedule schedule)
    : components_(std::move(components)), schedule_(std::move(schedule)) {
  if (components_.empty()) throw ConfigError("GMM needs at least one component");
  dim_ = static_cast<std::size_t>(components_.front().mean.size());
  double total = 0.0;
  for (const auto& c : components_) {
    if (static_cast<std::size_t>(c.mean.size()) != dim_ || static_cast<std::size_t>(c.covariance.rows()) != dim_) {
      throw DimensionError("GMM component dimensions differ");
    }
    if (!(c.weight > 0.0)) throw ConfigError("GMM weights must be positive");
    total += c.weight;
  }
  for (const auto& c : components_) {
    Eigen::MatrixXd vecs;
    Eigen::VectorXd vals;
    decompose_spd(c.covariance, vecs, vals);
    eigvecs_.push_back(std::move(vecs));
    eigvals_.push_back(std::move(vals));
    log_weights_.push_back(std::log(c.weight / total));
  }
}

Eigen::VectorXd GmmPrior::apply_precision(std::size_t j, const Eigen::VectorXd& v, int step) const {
  const double ab = schedule_.alpha_bar(step);
  Eigen::VectorXd z = eigvecs_[j].transpose() * v;
  z.array() /= ab * eigvals_[j].array() + (1.0 - ab);
  return eigvecs_[j] * z;
}

GmmPrior::Eval GmmPrior::evaluate(std::span<const double> x, int step) const {
  const double ab = schedule_.alpha_bar(step);
  const double root_ab = std::sqrt(ab);
  const Eigen::VectorXd xv = as_vector(x);
  const std::size_t m = components_.size();

  Eval e;
  e.resp.resize(m);
  e.comp_scores.resize(m);
  std::vector<double> logp(m);
  for (std::size_t j = 0; j < m; ++j) {
    const Eigen::VectorXd d = xv - root_ab * components_[j].mean;
    const Eigen::ArrayXd var = ab * eigvals_[j].array() + (1.0 - ab);
    const Eigen::ArrayXd z = (eigvecs_[j].transpose() * d).array();
    logp[j] = log_weights_[j] - 0.5 * (z.square() / var).sum() - 0.5 * var.log().sum();
    e.comp_scores[j] = -(eigvecs_[j] * (z / var).matrix());
  }
  const double mx = *std::max_element(logp.begin(), logp.end());
  double z = 0.0;
  for (std::size_t j = 0; j < m; ++j) z += std::exp(logp[j] - mx);
  e.score = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
  for (std::size_t j = 0; j < m; ++j) {
    e.resp[j] = std::exp(logp[j] - mx) / z;
    e.score += e.resp[j] * e.comp_scores[j];
  }
  return e;
}

State GmmPrior::score_impl(std::span<const double> x, int step, Label) const {
  return to_state(evaluate(x, step).score);
}

// J = sum_j r_j (-P_j) + sum_j r_j s_j s_j^T - s s^T, which is symmetric.
State GmmPrior::vjp_impl(std::span<const double> x, int step, std::span<const double> v, Label) const {
  const Eval e = evaluate(x, step);
  const Eigen::VectorXd vv = as_vector(v);
  Eigen::VectorXd out = -e.score * e.score.dot(vv);
  for (std::size_t j = 0; j < components_.size(); ++j) {
    out += e.resp[j] * (e.comp_scores[j] * e.comp_scores[j].dot(vv) - apply_precision(j, vv, step));
  }
  return to_state(out);
}

}  // namespace sepdiff
