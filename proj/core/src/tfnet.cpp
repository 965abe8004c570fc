// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepdiff/tfnet.hpp"

#include <cmath>
#include <random>

#include "json.hpp"
#include "sepdiff/checkpoint.hpp"
#include "sepdiff/errors.hpp"

namespace sepdiff::tfnet {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kLnEps = 1e-6;

double silu(double z) { return z / (1.0 + std::exp(-z)); }

VectorXd silu(const VectorXd& v) { return v.unaryExpr([](double z) { return silu(z); }); }

VectorXd layer_norm(const VectorXd& v) {
  const double mean = v.mean();
  const VectorXd d = v.array() - mean;
  const double var = d.squaredNorm() / static_cast<double>(v.size());
  return d / std::sqrt(var + kLnEps);
}

// Tokens as rows; q, k, v are n x E.
MatrixXd multi_head_attention(const MatrixXd& q, const MatrixXd& k, const MatrixXd& v, int heads) {
  const Eigen::Index n = q.rows();
  const Eigen::Index dh = q.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  MatrixXd out(n, q.cols());
  for (int h = 0; h < heads; ++h) {
    const auto qh = q.middleCols(h * dh, dh);
    const auto kh = k.middleCols(h * dh, dh);
    const auto vh = v.middleCols(h * dh, dh);
    MatrixXd s = (qh * kh.transpose()) * scale;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = s.row(i).maxCoeff();
      s.row(i) = (s.row(i).array() - m).exp();
      s.row(i) /= s.row(i).sum();
    }
    out.middleCols(h * dh, dh) = s * vh;
  }
  return out;
}

// Self-attention over `tokens` (n x d rows) after modulated layer norm;
// returns the projected attention output (n x d_out).
MatrixXd attend(const MatrixXd& tokens, const VectorXd& shift, const VectorXd& scale, const SwiGlu& qkv,
                const MatrixXd& w_o, const VectorXd& b_o, int heads) {
  const Eigen::Index n = tokens.rows();
  const Eigen::Index E = qkv.w_out.rows() / 3;
  MatrixXd q(n, E), k(n, E), v(n, E);
  for (Eigen::Index i = 0; i < n; ++i) {
    const VectorXd m = layer_norm(tokens.row(i).transpose()).cwiseProduct((1.0 + scale.array()).matrix()) + shift;
    const VectorXd p = qkv.apply(m);
    q.row(i) = p.segment(0, E).transpose();
    k.row(i) = p.segment(E, E).transpose();
    v.row(i) = p.segment(2 * E, E).transpose();
  }
  const MatrixXd a = multi_head_attention(q, k, v, heads);
  MatrixXd out(n, w_o.rows());
  for (Eigen::Index i = 0; i < n; ++i) out.row(i) = (w_o * a.row(i).transpose() + b_o).transpose();
  return out;
}

// Full axis-block update on a token matrix (n x C).
MatrixXd axis_block(const MatrixXd& tokens, const AxisBlock& b, const VectorXd& mod) {
  const Eigen::Index C = tokens.cols();
  const VectorXd shift1 = mod.segment(0, C), scale1 = mod.segment(C, C), gate1 = mod.segment(2 * C, C);
  const VectorXd shift2 = mod.segment(3 * C, C), scale2 = mod.segment(4 * C, C), gate2 = mod.segment(5 * C, C);
  MatrixXd h = tokens;
  const MatrixXd a = attend(h, shift1, scale1, b.qkv, b.w_o, b.b_o, b.heads);
  for (Eigen::Index i = 0; i < h.rows(); ++i) h.row(i) += a.row(i).cwiseProduct(gate1.transpose());
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    const VectorXd m =
        layer_norm(h.row(i).transpose()).cwiseProduct((1.0 + scale2.array()).matrix()) + shift2;
    h.row(i) += b.ffn.apply(m).cwiseProduct(gate2).transpose();
  }
  return h;
}

void check_block(const Tensor3& x, const AxisBlock& b, const VectorXd& cond) {
  if (b.mod.w.rows() != 6 * x.C || b.mod.w.cols() != cond.size()) {
    throw DimensionError("axis block expects " + std::to_string(b.mod.w.rows() / 6) + " channels and a " +
                         std::to_string(b.mod.w.cols()) + "-wide condition");
  }
}

}  // namespace

Tensor3 spectrogram_to_tensor(const Spectrogram& spec) {
  Tensor3 t(2, spec.bins, spec.frames);
  for (int f = 0; f < spec.frames; ++f) {
    for (int k = 0; k < spec.bins; ++k) {
      t.at(0, k, f) = spec.at(f, k).real();
      t.at(1, k, f) = spec.at(f, k).imag();
    }
  }
  return t;
}

void TfNetConfig::validate() const {
  if (C < 1 || F < 1 || T < 1 || N_F < 1 || C_prime < 1 || heads < 1 || embed_dim < 2 || class_count < 0) {
    throw ConfigError("tfnet dimensions must be positive");
  }
  if (embed_dim % heads != 0) throw ConfigError("embed_dim must be divisible by heads");
  if (embed_dim % 2 != 0) throw ConfigError("embed_dim must be even");
  if (F % 4 != 0) throw ConfigError("F must be divisible by 4 (two frequency downsamplings)");
  if ((F / 4) % N_F != 0) throw ConfigError("latent frequency width F/4 must be divisible by N_F");
  if (block_layout.size() != 5) throw ConfigError("block_layout must list five stages");
  for (int r : block_layout) {
    if (r < 0) throw ConfigError("block repetitions must be non-negative");
  }
}

VectorXd SwiGlu::apply(const VectorXd& x) const {
  const VectorXd g = silu(w_gate * x);
  return w_out * g.cwiseProduct(w_value * x);
}

VectorXd Modulation::apply(const VectorXd& cond) const { return w * silu(cond) + b; }

Tensor3 intra_frame_attention(const Tensor3& x, const AxisBlock& block, const VectorXd& cond) {
  check_block(x, block, cond);
  const VectorXd mod = block.mod.apply(cond);
  Tensor3 y = x;
  MatrixXd tok(x.F, x.C);
  for (int t = 0; t < x.T; ++t) {
    for (int f = 0; f < x.F; ++f) {
      for (int c = 0; c < x.C; ++c) tok(f, c) = x.at(c, f, t);
    }
    const MatrixXd out = axis_block(tok, block, mod);
    for (int f = 0; f < x.F; ++f) {
      for (int c = 0; c < x.C; ++c) y.at(c, f, t) = out(f, c);
    }
  }
  return y;
}

Tensor3 intra_frequency_attention(const Tensor3& x, const AxisBlock& block, const VectorXd& cond) {
  check_block(x, block, cond);
  const VectorXd mod = block.mod.apply(cond);
  Tensor3 y = x;
  MatrixXd tok(x.T, x.C);
  for (int f = 0; f < x.F; ++f) {
    for (int t = 0; t < x.T; ++t) {
      for (int c = 0; c < x.C; ++c) tok(t, c) = x.at(c, f, t);
    }
    const MatrixXd out = axis_block(tok, block, mod);
    for (int t = 0; t < x.T; ++t) {
      for (int c = 0; c < x.C; ++c) y.at(c, f, t) = out(t, c);
    }
  }
  return y;
}

Tensor3 unshuffle(const Tensor3& x, int n) {
  if (n < 1 || x.F % n != 0) throw ConfigError("frequency axis not divisible by unshuffle factor");
  Tensor3 y(x.C * n, x.F / n, x.T);
  for (int c = 0; c < x.C; ++c) {
    for (int f = 0; f < x.F; ++f) {
      for (int t = 0; t < x.T; ++t) y.at(c * n + f % n, f / n, t) = x.at(c, f, t);
    }
  }
  return y;
}

Tensor3 shuffle(const Tensor3& x, int n) {
  if (n < 1 || x.C % n != 0) throw ConfigError("channel axis not divisible by shuffle factor");
  Tensor3 y(x.C / n, x.F * n, x.T);
  for (int c = 0; c < y.C; ++c) {
    for (int f = 0; f < y.F; ++f) {
      for (int t = 0; t < y.T; ++t) y.at(c, f, t) = x.at(c * n + f % n, f / n, t);
    }
  }
  return y;
}

Tensor3 global_temporal_attention(const Tensor3& x, const GlobalBlock& b, const VectorXd& cond) {
  if (b.n_f < 1 || x.F % b.n_f != 0) {
    throw ConfigError("global temporal block: F=" + std::to_string(x.F) + " not divisible by N_F=" +
                      std::to_string(b.n_f));
  }
  const int Fs = x.F / b.n_f;
  const int D = b.c_prime * Fs;
  if (b.down.w_gate.cols() != x.C * b.n_f || b.mod.w.rows() != 2 * D + x.C || b.mod.w.cols() != cond.size()) {
    throw DimensionError("global temporal block parameters do not match the input shape");
  }
  const Tensor3 u = unshuffle(x, b.n_f);
  // Token for frame t: [c' * Fs + f'] = down(u[:, f', t])[c'].
  MatrixXd tok(x.T, D);
  VectorXd col(u.C);
  for (int t = 0; t < x.T; ++t) {
    for (int f = 0; f < Fs; ++f) {
      for (int c = 0; c < u.C; ++c) col[c] = u.at(c, f, t);
      const VectorXd d = b.down.apply(col);
      for (int c = 0; c < b.c_prime; ++c) tok(t, c * Fs + f) = d[c];
    }
  }
  const VectorXd mod = b.mod.apply(cond);
  const MatrixXd a = attend(tok, mod.segment(0, D), mod.segment(D, D), b.qkv, b.w_o, b.b_o, b.heads);
  Tensor3 back(u.C, Fs, x.T);
  VectorXd z(b.c_prime);
  for (int t = 0; t < x.T; ++t) {
    for (int f = 0; f < Fs; ++f) {
      for (int c = 0; c < b.c_prime; ++c) z[c] = a(t, c * Fs + f);
      const VectorXd r = b.w_up * z + b.b_up;
      for (int c = 0; c < u.C; ++c) back.at(c, f, t) = r[c];
    }
  }
  const Tensor3 s = shuffle(back, b.n_f);
  const VectorXd gate = mod.segment(2 * D, x.C);
  Tensor3 y = x;
  for (int c = 0; c < x.C; ++c) {
    for (int f = 0; f < x.F; ++f) {
      for (int t = 0; t < x.T; ++t) y.at(c, f, t) += gate[c] * s.at(c, f, t);
    }
  }
  return y;
}

Tensor3 Conv2d::apply(const Tensor3& x) const {
  const int in = static_cast<int>(w.cols() / 9);
  if (in != x.C) throw DimensionError("conv expects " + std::to_string(in) + " input channels");
  Tensor3 y(static_cast<int>(w.rows()), x.F, x.T);
  for (int o = 0; o < y.C; ++o) {
    for (int f = 0; f < x.F; ++f) {
      for (int t = 0; t < x.T; ++t) {
        double acc = b[o];
        for (int c = 0; c < in; ++c) {
          for (int df = 0; df < 3; ++df) {
            const int ff = f + df - 1;
            if (ff < 0 || ff >= x.F) continue;
            for (int dt = 0; dt < 3; ++dt) {
              const int tt = t + dt - 1;
              if (tt < 0 || tt >= x.T) continue;
              acc += w(o, (c * 3 + df) * 3 + dt) * x.at(c, ff, tt);
            }
          }
        }
        y.at(o, f, t) = acc;
      }
    }
  }
  return y;
}

Tensor3 DownConv::apply(const Tensor3& x) const {
  const int in = static_cast<int>(w.cols() / 3);
  if (in != x.C || x.F % 2 != 0) throw DimensionError("down conv shape mismatch");
  Tensor3 y(static_cast<int>(w.rows()), x.F / 2, x.T);
  for (int o = 0; o < y.C; ++o) {
    for (int f = 0; f < y.F; ++f) {
      for (int t = 0; t < x.T; ++t) {
        double acc = b[o];
        for (int c = 0; c < in; ++c) {
          for (int k = 0; k < 3; ++k) {
            const int ff = 2 * f + k - 1;
            if (ff >= 0 && ff < x.F) acc += w(o, c * 3 + k) * x.at(c, ff, t);
          }
        }
        y.at(o, f, t) = acc;
      }
    }
  }
  return y;
}

Tensor3 UpConv::apply(const Tensor3& x) const {
  if (w0.cols() != x.C) throw DimensionError("up conv shape mismatch");
  Tensor3 y(static_cast<int>(w0.rows()), x.F * 2, x.T);
  for (int o = 0; o < y.C; ++o) {
    for (int f = 0; f < x.F; ++f) {
      for (int t = 0; t < x.T; ++t) {
        double e = b[o], d = b[o];
        for (int c = 0; c < x.C; ++c) {
          e += w0(o, c) * x.at(c, f, t);
          d += w1(o, c) * x.at(c, f, t);
        }
        y.at(o, 2 * f, t) = e;
        y.at(o, 2 * f + 1, t) = d;
      }
    }
  }
  return y;
}

namespace {

// Visits every parameter array in a fixed order.
template <typename Params, typename Fn>
void visit(Params& p, Fn&& fn) {
  auto swiglu = [&](auto& s) {
    fn(s.w_gate);
    fn(s.w_value);
    fn(s.w_out);
  };
  auto axis = [&](auto& b) {
    fn(b.mod.w);
    fn(b.mod.b);
    swiglu(b.qkv);
    fn(b.w_o);
    fn(b.b_o);
    swiglu(b.ffn);
  };
  fn(p.t_w1);
  fn(p.t_b1);
  fn(p.t_w2);
  fn(p.t_b2);
  fn(p.class_table);
  fn(p.in_conv.w);
  fn(p.in_conv.b);
  for (auto& s : p.stages) {
    for (auto& b : s.frame_blocks) axis(b);
    for (auto& b : s.freq_blocks) axis(b);
    for (auto& g : s.global_blocks) {
      swiglu(g.down);
      fn(g.mod.w);
      fn(g.mod.b);
      swiglu(g.qkv);
      fn(g.w_o);
      fn(g.b_o);
      fn(g.w_up);
      fn(g.b_up);
    }
  }
  for (auto& d : p.down) {
    fn(d.w);
    fn(d.b);
  }
  for (auto& u : p.up) {
    fn(u.w0);
    fn(u.w1);
    fn(u.b);
  }
  fn(p.out_conv.w);
  fn(p.out_conv.b);
}

struct Init {
  std::mt19937_64 rng;
  std::normal_distribution<double> gauss;

  MatrixXd mat(Eigen::Index r, Eigen::Index c) {
    MatrixXd m(r, c);
    const double s = 1.0 / std::sqrt(static_cast<double>(c));
    for (Eigen::Index j = 0; j < c; ++j) {
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = s * gauss(rng);
    }
    return m;
  }
  SwiGlu swiglu(int in, int hidden, int out) { return {mat(hidden, in), mat(hidden, in), mat(out, hidden)}; }
  AxisBlock axis(int C, int E, int heads, int cond) {
    AxisBlock b;
    b.heads = heads;
    b.mod = {MatrixXd::Zero(6 * C, cond), VectorXd::Zero(6 * C)};
    b.qkv = swiglu(C, E, 3 * E);
    b.w_o = mat(C, E);
    b.b_o = VectorXd::Zero(C);
    b.ffn = swiglu(C, 2 * C, C);
    return b;
  }
};

}  // namespace

TfNetParams TfNetParams::initialize(const TfNetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Init init{std::mt19937_64(seed), {}};
  const int C = cfg.C, E = cfg.embed_dim;
  TfNetParams p;
  p.config = cfg;
  p.t_w1 = init.mat(E, E);
  p.t_b1 = VectorXd::Zero(E);
  p.t_w2 = init.mat(E, E);
  p.t_b2 = VectorXd::Zero(E);
  p.class_table = MatrixXd(cfg.class_count, E);
  for (Eigen::Index i = 0; i < p.class_table.size(); ++i) p.class_table.data()[i] = 0.1 * init.gauss(init.rng);
  p.in_conv = {init.mat(C, 2 * 9), VectorXd::Zero(C)};
  const int latent_F = cfg.F / 4;
  const int D = cfg.C_prime * latent_F / cfg.N_F;
  for (int s = 0; s < 5; ++s) {
    Stage st;
    for (int r = 0; r < cfg.block_layout[s]; ++r) {
      st.frame_blocks.push_back(init.axis(C, E, cfg.heads, E));
      st.freq_blocks.push_back(init.axis(C, E, cfg.heads, E));
      if (s == 2) {
        GlobalBlock g;
        g.heads = cfg.heads;
        g.n_f = cfg.N_F;
        g.c_prime = cfg.C_prime;
        g.down = init.swiglu(C * cfg.N_F, cfg.C_prime, cfg.C_prime);
        g.mod = {MatrixXd::Zero(2 * D + C, E), VectorXd::Zero(2 * D + C)};
        g.qkv = init.swiglu(D, E, 3 * E);
        g.w_o = init.mat(D, E);
        g.b_o = VectorXd::Zero(D);
        g.w_up = init.mat(C * cfg.N_F, cfg.C_prime);
        g.b_up = VectorXd::Zero(C * cfg.N_F);
        st.global_blocks.push_back(std::move(g));
      }
    }
    p.stages.push_back(std::move(st));
  }
  for (int i = 0; i < 2; ++i) p.down.push_back({init.mat(C, 3 * C), VectorXd::Zero(C)});
  for (int i = 0; i < 2; ++i) p.up.push_back({MatrixXd::Zero(C, C), MatrixXd::Zero(C, C), VectorXd::Zero(C)});
  p.out_conv = {init.mat(2, C * 9), VectorXd::Zero(2)};
  return p;
}

std::size_t TfNetParams::parameter_count() const {
  std::size_t n = 0;
  visit(*this, [&](const auto& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

std::vector<double> TfNetParams::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  visit(*this, [&](const auto& m) { out.insert(out.end(), m.data(), m.data() + m.size()); });
  return out;
}

void TfNetParams::unflatten(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw DimensionError("tfnet parameter buffer has the wrong size");
  std::size_t off = 0;
  visit(*this, [&](auto& m) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off), flat.begin() + static_cast<std::ptrdiff_t>(off + m.size()),
              m.data());
    off += static_cast<std::size_t>(m.size());
  });
}

VectorXd TfNetParams::condition(int step, Label label) const {
  const int E = config.embed_dim;
  if (step < 0) throw ConfigError("negative diffusion step");
  if (label && (*label < 0 || *label >= config.class_count)) {
    throw LabelError("class label " + std::to_string(*label) + " not in vocabulary");
  }
  VectorXd e(E);
  const int half = E / 2;
  for (int j = 0; j < half; ++j) {
    const double freq = std::exp(-std::log(10000.0) * j / half);
    e[j] = std::sin(step * freq);
    e[j + half] = std::cos(step * freq);
  }
  VectorXd c = t_w2 * silu(t_w1 * e + t_b1) + t_b2;
  if (label) c += class_table.row(*label).transpose();
  return c;
}

Tensor3 tfnet_forward(const Tensor3& x, int step, Label label, const TfNetParams& p) {
  const auto& cfg = p.config;
  if (x.C != 2 || x.F != cfg.F || x.T != cfg.T) {
    throw DimensionError("tfnet expects a (2, " + std::to_string(cfg.F) + ", " + std::to_string(cfg.T) +
                         ") input");
  }
  const VectorXd cond = p.condition(step, label);
  auto run_stage = [&](Tensor3 h, const Stage& s) {
    for (std::size_t r = 0; r < s.frame_blocks.size(); ++r) {
      h = intra_frame_attention(h, s.frame_blocks[r], cond);
      h = intra_frequency_attention(h, s.freq_blocks[r], cond);
      if (r < s.global_blocks.size()) h = global_temporal_attention(h, s.global_blocks[r], cond);
    }
    return h;
  };
  auto add = [](Tensor3 a, const Tensor3& b) {
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
    return a;
  };
  const Tensor3 e0 = run_stage(p.in_conv.apply(x), p.stages[0]);
  const Tensor3 e1 = run_stage(p.down[0].apply(e0), p.stages[1]);
  const Tensor3 lat = run_stage(p.down[1].apply(e1), p.stages[2]);
  const Tensor3 d1 = run_stage(add(p.up[0].apply(lat), e1), p.stages[3]);
  const Tensor3 d0 = run_stage(add(p.up[1].apply(d1), e0), p.stages[4]);
  return p.out_conv.apply(d0);
}

void save_tfnet(const std::filesystem::path& path, const TfNetParams& params) {
  const auto& c = params.config;
  nlohmann::json h;
  h["model"] = "tfnet";
  h["topology"] = {{"C", c.C},           {"F", c.F},         {"T", c.T},
                   {"N_F", c.N_F},       {"C_prime", c.C_prime}, {"heads", c.heads},
                   {"embed_dim", c.embed_dim}, {"block_layout", c.block_layout}, {"class_count", c.class_count}};
  write_checkpoint(path, {h.dump(), params.flatten()});
}

TfNetParams load_tfnet(const std::filesystem::path& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  TfNetConfig c;
  try {
    const auto h = nlohmann::json::parse(ckpt.header_json);
    if (h.value("model", "") != "tfnet") throw SchemaError("checkpoint " + path.string() + " does not hold a tfnet");
    const auto& t = h.at("topology");
    c.C = t.at("C");
    c.F = t.at("F");
    c.T = t.at("T");
    c.N_F = t.at("N_F");
    c.C_prime = t.at("C_prime");
    c.heads = t.at("heads");
    c.embed_dim = t.at("embed_dim");
    c.block_layout = t.at("block_layout").get<std::vector<int>>();
    c.class_count = t.at("class_count");
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("checkpoint " + path.string() + ": " + e.what());
  }
  TfNetParams p = TfNetParams::initialize(c, 0);
  p.unflatten(ckpt.params);
  return p;
}

}  // namespace sepdiff::tfnet
