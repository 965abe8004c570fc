// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sepdiff/prior.hpp"

namespace sepdiff {

struct DenoiserTopology {
  int channels = 16;
  int kernel = 5;
  int embed_dim = 16;
  int class_count = 0;
  /// RMS of the training data; fixes the input scaling 1/sqrt(ab s^2 + 1 - ab).
  double data_std = 1.0;
};

/// Small 1-D conv U-Net predicting the noise eps of a noised waveform.
///
///   in(1->C) -> down(s2) -> down(s2) -> mid(+res) -> up(+skip) -> up(+skip) -> out(C->1)
///
/// Every hidden conv is followed by a per-channel affine modulation whose
/// scale and shift are linear in the sinusoidal step embedding (plus an
/// additive class embedding for conditional models), then SiLU. The network
/// is fully convolutional; inputs must have a length divisible by 4.
///
/// As a score model: score = -eps_hat / sqrt(1 - alpha_bar).
class ToyDenoiser final : public ScoreModel {
 public:
  ToyDenoiser(DenoiserTopology topology, NoiseSchedule schedule, std::vector<double> params,
              std::vector<std::string> class_vocab = {});

  /// Random initialization (fan-in scaled conv weights, small modulation weights).
  static ToyDenoiser initialize(DenoiserTopology topology, NoiseSchedule schedule, std::uint64_t seed,
                                std::vector<std::string> class_vocab = {});

  static std::size_t parameter_count(const DenoiserTopology& topology);

  ModelKind kind() const noexcept override { return ModelKind::kToyDenoiser; }
  std::size_t dim() const noexcept override { return 0; }
  int class_count() const noexcept override { return topology_.class_count; }
  const NoiseSchedule& schedule() const noexcept override { return schedule_; }
  bool has_vjp() const noexcept override { return true; }

  const DenoiserTopology& topology() const noexcept { return topology_; }
  std::span<const double> parameters() const noexcept { return params_; }
  const std::vector<std::string>& class_vocab() const noexcept { return class_vocab_; }

  /// Network output eps_hat for a noised input at `step`.
  State predict_noise(std::span<const double> x, int step, Label label = std::nullopt) const;

  /// Mean squared noise-prediction error over a batch together with its
  /// gradient w.r.t. every parameter (same layout as parameters()).
  double loss_and_gradient(std::span<const State> noised, std::span<const int> steps, std::span<const Label> labels,
                           std::span<const State> noise, std::vector<double>& grad) const;

  /// Transpose-Jacobian of predict_noise at x applied to v.
  State noise_vjp(std::span<const double> x, int step, std::span<const double> v, Label label = std::nullopt) const;

  struct Activations;

 protected:
  State score_impl(std::span<const double> x, int step, Label label) const override;
  State vjp_impl(std::span<const double> x, int step, std::span<const double> v, Label label) const override;
  Linearization linearize_impl(std::span<const double> x, int step, Label label) const override;

 private:
  void check_length(std::size_t n) const;
  double input_scale(int step) const;
  std::shared_ptr<Activations> forward(std::span<const double> x, int step, Label label) const;
  // Accumulates parameter gradients into `param_grad` when non-empty and
  // returns d/dx of <dout, eps_hat>.
  State backward(const Activations& act, std::span<const double> dout, std::span<double> param_grad) const;

  DenoiserTopology topology_;
  NoiseSchedule schedule_;
  std::vector<double> params_;
  std::vector<std::string> class_vocab_;
};

struct TrainingExample {
  std::vector<double> samples;
  Label label;
};

struct TrainConfig {
  int steps = 2000;
  int batch = 8;
  std::size_t crop = 512;   ///< random crop length (multiple of 4; 0 = full length)
  double lr = 2e-3;
  double grad_clip = 1.0;
  int eval_batch = 32;
  DenoiserTopology topology;  ///< data_std is measured from the dataset
};

struct TrainResult {
  ToyDenoiser model;
  std::vector<double> loss_history;  ///< per-step training batch loss
  double initial_eval_loss = 0.0;    ///< fixed evaluation batch, before training
  double final_eval_loss = 0.0;      ///< same batch, after training
};

/// Adam on the eps-prediction objective E|eps - eps_hat(noise_to_level(x0, t, eps), t)|^2
/// with uniform t, global-norm gradient clipping and cosine learning-rate
/// decay. Bit-reproducible for a given seed. Throws TrainingError when the
/// loss becomes non-finite.
TrainResult train_denoiser(std::span<const TrainingExample> dataset, const NoiseSchedule& schedule,
                           const TrainConfig& config, std::uint64_t seed,
                           std::vector<std::string> class_vocab = {});

/// Loss on the fixed evaluation batch derived from (dataset, config, seed).
double evaluate_denoiser(const ToyDenoiser& model, std::span<const TrainingExample> dataset,
                         const TrainConfig& config, std::uint64_t seed);

}  // namespace sepdiff
