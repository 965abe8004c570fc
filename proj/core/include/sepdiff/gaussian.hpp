// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sepdiff/prior.hpp"

namespace sepdiff {

/// Gaussian source prior N(mean, covariance). Its noised marginal at step t is
/// N(sqrt(ab) mean, ab * covariance + (1 - ab) I), so score and Jacobian are
/// exact.
class GaussianPrior final : public ScoreModel {
 public:
  /// Throws ConfigError unless covariance is symmetric positive-definite.
  GaussianPrior(Eigen::VectorXd mean, Eigen::MatrixXd covariance, NoiseSchedule schedule);
  static GaussianPrior diagonal(Eigen::VectorXd mean, const Eigen::VectorXd& variances, NoiseSchedule schedule);

  ModelKind kind() const noexcept override { return ModelKind::kAnalyticGaussian; }
  std::size_t dim() const noexcept override { return static_cast<std::size_t>(mean_.size()); }
  const NoiseSchedule& schedule() const noexcept override { return schedule_; }
  bool has_exact_jacobian() const noexcept override { return true; }
  bool has_vjp() const noexcept override { return true; }

  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  const Eigen::MatrixXd& covariance() const noexcept { return cov_; }

 protected:
  State score_impl(std::span<const double> x, int step, Label label) const override;
  State vjp_impl(std::span<const double> x, int step, std::span<const double> v, Label label) const override;

 private:
  Eigen::VectorXd apply_precision(const Eigen::VectorXd& v, int step) const;

  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd eigvecs_;
  Eigen::VectorXd eigvals_;
  NoiseSchedule schedule_;
};

/// Finite Gaussian mixture prior; score via log-sum-exp responsibilities.
class GmmPrior final : public ScoreModel {
 public:
  struct Component {
    double weight = 1.0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
  };

  GmmPrior(std::vector<Component> components, NoiseSchedule schedule);

  ModelKind kind() const noexcept override { return ModelKind::kAnalyticGmm; }
  std::size_t dim() const noexcept override { return dim_; }
  const NoiseSchedule& schedule() const noexcept override { return schedule_; }
  bool has_exact_jacobian() const noexcept override { return true; }
  bool has_vjp() const noexcept override { return true; }

  const std::vector<Component>& components() const noexcept { return components_; }

 protected:
  State score_impl(std::span<const double> x, int step, Label label) const override;
  State vjp_impl(std::span<const double> x, int step, std::span<const double> v, Label label) const override;

 private:
  struct Eval {
    std::vector<double> resp;
    std::vector<Eigen::VectorXd> comp_scores;
    Eigen::VectorXd score;
  };
  Eval evaluate(std::span<const double> x, int step) const;
  Eigen::VectorXd apply_precision(std::size_t j, const Eigen::VectorXd& v, int step) const;

  std::vector<Component> components_;
  std::vector<Eigen::MatrixXd> eigvecs_;
  std::vector<Eigen::VectorXd> eigvals_;
  std::vector<double> log_weights_;
  std::size_t dim_ = 0;
  NoiseSchedule schedule_;
};

}  // namespace sepdiff
