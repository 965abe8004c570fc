// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Loop-level tfnet reference and helpers shared by the unit and acceptance tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "sepdiff/tfnet.hpp"

namespace tfnet_ref {

using namespace sepdiff;
using namespace sepdiff::tfnet;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Tokens are rows of plain nested vectors.

using Rows = std::vector<std::vector<double>>;

inline double silu(double z) { return z / (1.0 + std::exp(-z)); }

inline std::vector<double> matvec(const MatrixXd& m, const std::vector<double>& x) {
  std::vector<double> y(m.rows(), 0.0);
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) y[i] += m(i, j) * x[j];
  }
  return y;
}

inline std::vector<double> swiglu(const SwiGlu& s, const std::vector<double>& x) {
  const auto g = matvec(s.w_gate, x);
  const auto v = matvec(s.w_value, x);
  std::vector<double> h(g.size());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = silu(g[i]) * v[i];
  return matvec(s.w_out, h);
}

inline std::vector<double> modulated_norm(const std::vector<double>& x, const double* shift, const double* scale) {
  double mean = 0;
  for (double v : x) mean += v;
  mean /= x.size();
  double var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= x.size();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mean) / std::sqrt(var + 1e-6) * (1 + scale[i]) + shift[i];
  return y;
}

inline std::vector<double> modulation(const Modulation& m, const VectorXd& cond) {
  std::vector<double> c(cond.size());
  for (int i = 0; i < cond.size(); ++i) c[i] = silu(cond[i]);
  auto y = matvec(m.w, c);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += m.b[i];
  return y;
}

inline Rows attention(const Rows& tok, const double* shift, const double* scale, const SwiGlu& qkv, const MatrixXd& w_o,
               const VectorXd& b_o, int heads) {
  const std::size_t n = tok.size();
  const int E = static_cast<int>(qkv.w_out.rows() / 3);
  const int dh = E / heads;
  Rows q(n), k(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = swiglu(qkv, modulated_norm(tok[i], shift, scale));
    q[i].assign(p.begin(), p.begin() + E);
    k[i].assign(p.begin() + E, p.begin() + 2 * E);
    v[i].assign(p.begin() + 2 * E, p.end());
  }
  Rows out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> a(E, 0.0);
    for (int h = 0; h < heads; ++h) {
      std::vector<double> s(n);
      for (std::size_t j = 0; j < n; ++j) {
        double d = 0;
        for (int c = 0; c < dh; ++c) d += q[i][h * dh + c] * k[j][h * dh + c];
        s[j] = d / std::sqrt(static_cast<double>(dh));
      }
      const double m = *std::max_element(s.begin(), s.end());
      double z = 0;
      for (auto& x : s) z += (x = std::exp(x - m));
      for (std::size_t j = 0; j < n; ++j) {
        for (int c = 0; c < dh; ++c) a[h * dh + c] += s[j] / z * v[j][h * dh + c];
      }
    }
    out[i] = matvec(w_o, a);
    for (std::size_t c = 0; c < out[i].size(); ++c) out[i][c] += b_o[c];
  }
  return out;
}

inline Rows axis_reference(Rows tok, const AxisBlock& b, const VectorXd& cond) {
  const std::size_t C = tok[0].size();
  const auto mod = modulation(b.mod, cond);
  const auto a = attention(tok, &mod[0], &mod[C], b.qkv, b.w_o, b.b_o, b.heads);
  for (std::size_t i = 0; i < tok.size(); ++i) {
    for (std::size_t c = 0; c < C; ++c) tok[i][c] += mod[2 * C + c] * a[i][c];
  }
  for (auto& t : tok) {
    const auto f = swiglu(b.ffn, modulated_norm(t, &mod[3 * C], &mod[4 * C]));
    for (std::size_t c = 0; c < C; ++c) t[c] += mod[5 * C + c] * f[c];
  }
  return tok;
}

inline Tensor3 frame_reference(const Tensor3& x, const AxisBlock& b, const VectorXd& cond) {
  Tensor3 y = x;
  for (int t = 0; t < x.T; ++t) {
    Rows tok(x.F, std::vector<double>(x.C));
    for (int f = 0; f < x.F; ++f) {
      for (int c = 0; c < x.C; ++c) tok[f][c] = x.at(c, f, t);
    }
    const auto out = axis_reference(tok, b, cond);
    for (int f = 0; f < x.F; ++f) {
      for (int c = 0; c < x.C; ++c) y.at(c, f, t) = out[f][c];
    }
  }
  return y;
}

inline Tensor3 freq_reference(const Tensor3& x, const AxisBlock& b, const VectorXd& cond) {
  Tensor3 y = x;
  for (int f = 0; f < x.F; ++f) {
    Rows tok(x.T, std::vector<double>(x.C));
    for (int t = 0; t < x.T; ++t) {
      for (int c = 0; c < x.C; ++c) tok[t][c] = x.at(c, f, t);
    }
    const auto out = axis_reference(tok, b, cond);
    for (int t = 0; t < x.T; ++t) {
      for (int c = 0; c < x.C; ++c) y.at(c, f, t) = out[t][c];
    }
  }
  return y;
}

// Written directly from the definition (sub-band r of group f' is bin f' n + r,
// unshuffled channel c n + r), without the library's reshape helpers.
inline Tensor3 global_reference(const Tensor3& x, const GlobalBlock& b, const VectorXd& cond) {
  const int n = b.n_f, Fs = x.F / n, D = b.c_prime * Fs;
  Rows tok(x.T, std::vector<double>(D));
  for (int t = 0; t < x.T; ++t) {
    for (int g = 0; g < Fs; ++g) {
      std::vector<double> col(x.C * n);
      for (int c = 0; c < x.C; ++c) {
        for (int r = 0; r < n; ++r) col[c * n + r] = x.at(c, g * n + r, t);
      }
      const auto d = swiglu(b.down, col);
      for (int c = 0; c < b.c_prime; ++c) tok[t][c * Fs + g] = d[c];
    }
  }
  const auto mod = modulation(b.mod, cond);
  const auto a = attention(tok, &mod[0], &mod[D], b.qkv, b.w_o, b.b_o, b.heads);
  Tensor3 y = x;
  for (int t = 0; t < x.T; ++t) {
    for (int g = 0; g < Fs; ++g) {
      std::vector<double> z(b.c_prime);
      for (int c = 0; c < b.c_prime; ++c) z[c] = a[t][c * Fs + g];
      auto up = matvec(b.w_up, z);
      for (int c = 0; c < x.C; ++c) {
        for (int r = 0; r < n; ++r) y.at(c, g * n + r, t) += mod[2 * D + c] * (up[c * n + r] + b.b_up[c * n + r]);
      }
    }
  }
  return y;
}

inline Tensor3 random_tensor(int C, int F, int T, std::mt19937_64& rng) {
  Tensor3 x(C, F, T);
  std::normal_distribution<double> g;
  for (auto& v : x.data) v = g(rng);
  return x;
}

inline void randomize(MatrixXd& m, std::mt19937_64& rng, double s = 0.5) {
  std::normal_distribution<double> g(0.0, s);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
}
inline void randomize(VectorXd& v, std::mt19937_64& rng, double s = 0.5) {
  std::normal_distribution<double> g(0.0, s);
  for (auto& x : v) x = g(rng);
}

inline TfNetConfig tiny_config() {
  TfNetConfig c;
  c.C = 4;
  c.F = 8;
  c.T = 6;
  c.N_F = 2;
  c.C_prime = 2;
  c.heads = 2;
  c.embed_dim = 8;
  c.block_layout = {1, 1, 1, 1, 1};
  c.class_count = 3;
  return c;
}

// All-parameter perturbation, which opens every gate.
inline TfNetParams perturbed(const TfNetConfig& cfg, std::uint64_t seed, double s = 0.3) {
  auto p = TfNetParams::initialize(cfg, seed);
  auto flat = p.flatten();
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> g(0.0, s);
  for (auto& v : flat) v += g(rng);
  p.unflatten(flat);
  return p;
}

inline Tensor3 permute_t(const Tensor3& x, const std::vector<int>& perm) {
  Tensor3 y = x;
  for (int c = 0; c < x.C; ++c) {
    for (int f = 0; f < x.F; ++f) {
      for (int t = 0; t < x.T; ++t) y.at(c, f, t) = x.at(c, f, perm[t]);
    }
  }
  return y;
}

inline Tensor3 permute_f(const Tensor3& x, const std::vector<int>& perm) {
  Tensor3 y = x;
  for (int c = 0; c < x.C; ++c) {
    for (int f = 0; f < x.F; ++f) {
      for (int t = 0; t < x.T; ++t) y.at(c, f, t) = x.at(c, perm[f], t);
    }
  }
  return y;
}

// The latent stage runs at F / 4; this rebuilds its global block for the full
// width with random weights so it can act on stage-0 tensors.
inline GlobalBlock full_width_global(const TfNetParams& p, const TfNetConfig& cfg, std::mt19937_64& rng) {
  GlobalBlock g = p.stages[2].global_blocks[0];
  const int D = cfg.C_prime * cfg.F / cfg.N_F;
  g.mod.w = MatrixXd(2 * D + cfg.C, cfg.embed_dim);
  g.mod.b = VectorXd(2 * D + cfg.C);
  randomize(g.mod.w, rng);
  randomize(g.mod.b, rng);
  g.qkv.w_gate = MatrixXd(cfg.embed_dim, D);
  g.qkv.w_value = MatrixXd(cfg.embed_dim, D);
  randomize(g.qkv.w_gate, rng);
  randomize(g.qkv.w_value, rng);
  g.w_o = MatrixXd(D, cfg.embed_dim);
  g.b_o = VectorXd(D);
  randomize(g.w_o, rng);
  randomize(g.b_o, rng);
  return g;
}

inline double max_diff(const Tensor3& a, const Tensor3& b) { return oracle::max_abs_diff(a.data, b.data); }

}  // namespace tfnet_ref
