// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "sepdiff/prior.hpp"
#include "sepdiff/signal.hpp"

namespace sepdiff::tfnet {

/// Dense feature map laid out (channel, frequency, time), time fastest.
struct Tensor3 {
  int C = 0;
  int F = 0;
  int T = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(int c, int f, int t) : C(c), F(f), T(t), data(static_cast<std::size_t>(c) * f * t, 0.0) {}

  double& at(int c, int f, int t) { return data[(static_cast<std::size_t>(c) * F + f) * T + t]; }
  double at(int c, int f, int t) const { return data[(static_cast<std::size_t>(c) * F + f) * T + t]; }
  bool operator==(const Tensor3&) const = default;
};

/// (2, bins, frames) real/imaginary planes of a spectrogram.
Tensor3 spectrogram_to_tensor(const Spectrogram& spec);

struct TfNetConfig {
  int C = 8;
  int F = 32;
  int T = 24;
  int N_F = 4;
  int C_prime = 4;
  int heads = 2;
  int embed_dim = 16;  ///< attention width; also the conditioning width
  std::vector<int> block_layout = {2, 4, 8, 4, 2};
  int class_count = 0;

  /// F divisible by 4 and the latent width F/4 divisible by N_F;
  /// embed_dim divisible by heads; five stages.
  void validate() const;
};

/// W_out (silu(W_gate x) * (W_value x)); no biases.
struct SwiGlu {
  Eigen::MatrixXd w_gate;   ///< hidden x in
  Eigen::MatrixXd w_value;  ///< hidden x in
  Eigen::MatrixXd w_out;    ///< out x hidden

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
};

/// Linear map from silu(cond) to modulation coefficients. Zero at
/// initialization, so every gate starts closed.
struct Modulation {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;

  Eigen::VectorXd apply(const Eigen::VectorXd& cond) const;
};

/// Transformer layer over one axis: AdaLN-Zero, SwiGLU q/k/v projection,
/// multi-head attention, output linear, gated residual; then AdaLN-Zero,
/// SwiGLU feed-forward, gated residual. The modulation vector is
/// [shift1 | scale1 | gate1 | shift2 | scale2 | gate2], each of width C.
struct AxisBlock {
  int heads = 1;
  Modulation mod;
  SwiGlu qkv;            ///< C -> 3E
  Eigen::MatrixXd w_o;   ///< C x E
  Eigen::VectorXd b_o;
  SwiGlu ffn;            ///< C -> C
};

/// Attention over frequency bins, independently for every frame.
Tensor3 intra_frame_attention(const Tensor3& x, const AxisBlock& block, const Eigen::VectorXd& cond);
/// Attention over frames, independently for every frequency bin.
Tensor3 intra_frequency_attention(const Tensor3& x, const AxisBlock& block, const Eigen::VectorXd& cond);

/// (C, F, T) -> (C * n, F / n, T); channel c * n + r holds bins r, r + n, ...
Tensor3 unshuffle(const Tensor3& x, int n);
/// Inverse of unshuffle.
Tensor3 shuffle(const Tensor3& x, int n);

/// Unshuffle by N_F, SwiGLU down to C' per position, flatten each frame to a
/// D = C' F / N_F token, AdaLN-modulated attention over all frames, project
/// back to C N_F, shuffle, gated residual. Modulation vector is
/// [shift (D) | scale (D) | gate (C)].
struct GlobalBlock {
  int heads = 1;
  int n_f = 1;
  int c_prime = 1;
  SwiGlu down;            ///< C N_F -> C'
  Modulation mod;
  SwiGlu qkv;             ///< D -> 3E
  Eigen::MatrixXd w_o;    ///< D x E
  Eigen::VectorXd b_o;
  Eigen::MatrixXd w_up;   ///< C N_F x C'
  Eigen::VectorXd b_up;
};

Tensor3 global_temporal_attention(const Tensor3& x, const GlobalBlock& block, const Eigen::VectorXd& cond);

/// 3x3 "same" convolution over (F, T).
struct Conv2d {
  Eigen::MatrixXd w;  ///< out x (in * 9), index (c * 3 + df) * 3 + dt
  Eigen::VectorXd b;

  Tensor3 apply(const Tensor3& x) const;
};

/// Kernel 3, stride 2, padding 1 along frequency; halves F.
struct DownConv {
  Eigen::MatrixXd w;  ///< out x (in * 3)
  Eigen::VectorXd b;

  Tensor3 apply(const Tensor3& x) const;
};

/// Transposed kernel 2, stride 2 along frequency; doubles F. Zero at
/// initialization so the decoder path starts as the skip connection alone.
struct UpConv {
  Eigen::MatrixXd w0;  ///< out x in, even output bins
  Eigen::MatrixXd w1;  ///< out x in, odd output bins
  Eigen::VectorXd b;

  Tensor3 apply(const Tensor3& x) const;
};

struct Stage {
  std::vector<AxisBlock> frame_blocks;
  std::vector<AxisBlock> freq_blocks;
  std::vector<GlobalBlock> global_blocks;  ///< latent stage only
};

/// Triple-path attention U-Net:
///   in conv -> stage0 -> down -> stage1 -> down -> latent
///   -> up (+stage1 skip) -> stage3 -> up (+stage0 skip) -> stage4 -> out conv
struct TfNetParams {
  TfNetConfig config;
  Conv2d in_conv;   ///< 2 -> C
  Conv2d out_conv;  ///< C -> 2
  std::vector<Stage> stages;
  std::vector<DownConv> down;
  std::vector<UpConv> up;
  Eigen::MatrixXd t_w1, t_w2;  ///< timestep MLP, E x E each
  Eigen::VectorXd t_b1, t_b2;
  Eigen::MatrixXd class_table;  ///< class_count x E

  static TfNetParams initialize(const TfNetConfig& config, std::uint64_t seed);

  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);

  /// sinusoid(step) -> MLP, plus the class embedding when labelled.
  Eigen::VectorXd condition(int step, Label label) const;
};

/// Complex noise estimate with the same shape as `x` (2 x F x T).
Tensor3 tfnet_forward(const Tensor3& x, int step, Label label, const TfNetParams& params);

void save_tfnet(const std::filesystem::path& path, const TfNetParams& params);
TfNetParams load_tfnet(const std::filesystem::path& path);

}  // namespace sepdiff::tfnet
