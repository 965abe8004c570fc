// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepdiff/toy_denoiser.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "sepdiff/errors.hpp"

namespace sepdiff {

namespace {

constexpr int kConvLayers = 7;
constexpr int kFilmLayers = 6;

struct ConvShape {
  int in_ch;
  int out_ch;
  int stride;
};

std::array<ConvShape, kConvLayers> conv_shapes(int c) {
  return {{{1, c, 1}, {c, c, 2}, {c, c, 2}, {c, c, 1}, {c, c, 1}, {c, c, 1}, {c, 1, 1}}};
}

struct Layout {
  std::array<std::size_t, kConvLayers> conv_w{}, conv_b{};
  std::array<std::size_t, kFilmLayers> film_w{}, film_b{};
  std::size_t class_table = 0;
  std::size_t total = 0;
};

Layout make_layout(const DenoiserTopology& t) {
  Layout l;
  std::size_t off = 0;
  const auto shapes = conv_shapes(t.channels);
  for (int i = 0; i < kConvLayers; ++i) {
    l.conv_w[i] = off;
    off += static_cast<std::size_t>(shapes[i].out_ch) * shapes[i].in_ch * t.kernel;
    l.conv_b[i] = off;
    off += static_cast<std::size_t>(shapes[i].out_ch);
  }
  for (int i = 0; i < kFilmLayers; ++i) {
    l.film_w[i] = off;
    off += static_cast<std::size_t>(2 * t.channels) * t.embed_dim;
    l.film_b[i] = off;
    off += static_cast<std::size_t>(2 * t.channels);
  }
  l.class_table = off;
  off += static_cast<std::size_t>(t.class_count) * t.embed_dim;
  l.total = off;
  return l;
}

// out[o][i] = b[o] + sum_c sum_k w[o][c][k] * in[c][i*stride + k - K/2], zero padded.
void conv_forward(const double* w, const double* b, const ConvShape& s, int kernel, const double* in, int in_len,
                  double* out, int out_len) {
  const int pad = kernel / 2;
  for (int o = 0; o < s.out_ch; ++o) {
    double* orow = out + static_cast<std::size_t>(o) * out_len;
    std::fill(orow, orow + out_len, b[o]);
    for (int c = 0; c < s.in_ch; ++c) {
      const double* irow = in + static_cast<std::size_t>(c) * in_len;
      const double* wk = w + (static_cast<std::size_t>(o) * s.in_ch + c) * kernel;
      for (int k = 0; k < kernel; ++k) {
        const int shift = k - pad;
        const int lo = std::max(0, (-shift + s.stride - 1) / s.stride);
        const int hi = std::min(out_len, (in_len - shift + s.stride - 1) / s.stride);
        const double wv = wk[k];
        if (s.stride == 1) {
          const double* src = irow + shift;
          for (int i = lo; i < hi; ++i) orow[i] += wv * src[i];
        } else {
          for (int i = lo; i < hi; ++i) orow[i] += wv * irow[i * s.stride + shift];
        }
      }
    }
  }
}

void conv_backward(const double* w, const ConvShape& s, int kernel, const double* in, int in_len, const double* dout,
                   int out_len, double* dw, double* db, double* din) {
  const int pad = kernel / 2;
  for (int o = 0; o < s.out_ch; ++o) {
    const double* drow = dout + static_cast<std::size_t>(o) * out_len;
    if (db != nullptr) {
      double acc = 0.0;
      for (int i = 0; i < out_len; ++i) acc += drow[i];
      db[o] += acc;
    }
    for (int c = 0; c < s.in_ch; ++c) {
      const double* irow = in + static_cast<std::size_t>(c) * in_len;
      double* dirow = din != nullptr ? din + static_cast<std::size_t>(c) * in_len : nullptr;
      const std::size_t wbase = (static_cast<std::size_t>(o) * s.in_ch + c) * kernel;
      for (int k = 0; k < kernel; ++k) {
        const int shift = k - pad;
        const int lo = std::max(0, (-shift + s.stride - 1) / s.stride);
        const int hi = std::min(out_len, (in_len - shift + s.stride - 1) / s.stride);
        const double wv = w[wbase + k];
        if (dw != nullptr) {
          double acc = 0.0;
          for (int i = lo; i < hi; ++i) acc += drow[i] * irow[i * s.stride + shift];
          dw[wbase + k] += acc;
        }
        if (dirow != nullptr) {
          if (s.stride == 1) {
            double* dst = dirow + shift;
            for (int i = lo; i < hi; ++i) dst[i] += wv * drow[i];
          } else {
            for (int i = lo; i < hi; ++i) dirow[i * s.stride + shift] += wv * drow[i];
          }
        }
      }
    }
  }
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<double> upsample2(const std::vector<double>& in, int ch, int len) {
  std::vector<double> out(static_cast<std::size_t>(ch) * len * 2);
  for (int c = 0; c < ch; ++c) {
    for (int i = 0; i < len; ++i) {
      const double v = in[static_cast<std::size_t>(c) * len + i];
      out[static_cast<std::size_t>(c) * len * 2 + 2 * i] = v;
      out[static_cast<std::size_t>(c) * len * 2 + 2 * i + 1] = v;
    }
  }
  return out;
}

std::vector<double> upsample2_backward(const std::vector<double>& dout, int ch, int len) {
  std::vector<double> din(static_cast<std::size_t>(ch) * len);
  for (int c = 0; c < ch; ++c) {
    for (int i = 0; i < len; ++i) {
      din[static_cast<std::size_t>(c) * len + i] = dout[static_cast<std::size_t>(c) * len * 2 + 2 * i] +
                                                   dout[static_cast<std::size_t>(c) * len * 2 + 2 * i + 1];
    }
  }
  return din;
}

}  // namespace

struct ToyDenoiser::Activations {
  int step = 0;
  Label label;
  double in_scale = 1.0;
  std::vector<int> lens;                       // per conv layer: output length
  std::vector<double> embed;                   // E
  std::vector<std::vector<double>> mod;        // per film layer: [gamma (C) | beta (C)]
  std::vector<std::vector<double>> conv_in;    // per conv layer: input activations
  std::vector<std::vector<double>> pre;        // per film layer: conv output a
  std::vector<std::vector<double>> z;          // per film layer: modulated pre-activation
};

ToyDenoiser::ToyDenoiser(DenoiserTopology topology, NoiseSchedule schedule, std::vector<double> params,
                         std::vector<std::string> class_vocab)
    : topology_(topology),
      schedule_(std::move(schedule)),
      params_(std::move(params)),
      class_vocab_(std::move(class_vocab)) {
  if (topology_.channels < 1 || topology_.kernel < 1 || topology_.kernel % 2 == 0 || topology_.embed_dim < 2 ||
      topology_.embed_dim % 2 != 0 || topology_.class_count < 0 || !(topology_.data_std > 0.0)) {
    throw ConfigError("invalid toy denoiser topology");
  }
  if (params_.size() != parameter_count(topology_)) {
    throw DimensionError("toy denoiser expects " + std::to_string(parameter_count(topology_)) +
                         " parameters, got " + std::to_string(params_.size()));
  }
  if (!class_vocab_.empty() && static_cast<int>(class_vocab_.size()) != topology_.class_count) {
    throw ConfigError("class vocabulary size does not match topology class_count");
  }
}

std::size_t ToyDenoiser::parameter_count(const DenoiserTopology& topology) { return make_layout(topology).total; }

ToyDenoiser ToyDenoiser::initialize(DenoiserTopology topology, NoiseSchedule schedule, std::uint64_t seed,
                                    std::vector<std::string> class_vocab) {
  const Layout l = make_layout(topology);
  std::vector<double> p(l.total, 0.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  const auto shapes = conv_shapes(topology.channels);
  for (int i = 0; i < kConvLayers; ++i) {
    const double fan_in = static_cast<double>(shapes[i].in_ch * topology.kernel);
    const double scale = (i == kConvLayers - 1 ? 0.5 : 1.0) / std::sqrt(fan_in);
    const std::size_t n = static_cast<std::size_t>(shapes[i].out_ch) * shapes[i].in_ch * topology.kernel;
    for (std::size_t j = 0; j < n; ++j) p[l.conv_w[i] + j] = scale * gauss(rng);
  }
  for (int i = 0; i < kFilmLayers; ++i) {
    const std::size_t n = static_cast<std::size_t>(2 * topology.channels) * topology.embed_dim;
    for (std::size_t j = 0; j < n; ++j) p[l.film_w[i] + j] = 0.02 * gauss(rng);
  }
  for (std::size_t j = 0; j < static_cast<std::size_t>(topology.class_count) * topology.embed_dim; ++j) {
    p[l.class_table + j] = 0.1 * gauss(rng);
  }
  return ToyDenoiser(topology, std::move(schedule), std::move(p), std::move(class_vocab));
}

void ToyDenoiser::check_length(std::size_t n) const {
  if (n < 4 || n % 4 != 0) {
    throw DimensionError("toy denoiser input length must be a positive multiple of 4, got " + std::to_string(n));
  }
}

double ToyDenoiser::input_scale(int step) const {
  const double ab = schedule_.alpha_bar(step);
  return 1.0 / std::sqrt(ab * topology_.data_std * topology_.data_std + 1.0 - ab);
}

std::shared_ptr<ToyDenoiser::Activations> ToyDenoiser::forward(std::span<const double> x, int step,
                                                               Label label) const {
  check_length(x.size());
  if (label && (*label < 0 || *label >= topology_.class_count)) {
    throw LabelError("class label " + std::to_string(*label) + " not in vocabulary");
  }
  if (step < 0 || step >= schedule_.steps()) throw ConfigError("step outside schedule");
  const Layout l = make_layout(topology_);
  const auto shapes = conv_shapes(topology_.channels);
  const int C = topology_.channels;
  const int K = topology_.kernel;
  const int E = topology_.embed_dim;
  const int n = static_cast<int>(x.size());
  const double* p = params_.data();

  auto act = std::make_shared<Activations>();
  act->step = step;
  act->label = label;
  act->in_scale = input_scale(step);
  act->lens = {n, n / 2, n / 4, n / 4, n / 2, n, n};

  act->embed.assign(static_cast<std::size_t>(E), 0.0);
  const int half = E / 2;
  for (int j = 0; j < half; ++j) {
    const double freq = std::exp(-std::log(10000.0) * j / half);
    act->embed[j] = std::sin(step * freq);
    act->embed[j + half] = std::cos(step * freq);
  }
  if (label) {
    for (int j = 0; j < E; ++j) act->embed[j] += p[l.class_table + static_cast<std::size_t>(*label) * E + j];
  }
  act->mod.resize(kFilmLayers);
  for (int f = 0; f < kFilmLayers; ++f) {
    auto& m = act->mod[f];
    m.assign(static_cast<std::size_t>(2 * C), 0.0);
    for (int r = 0; r < 2 * C; ++r) {
      double acc = p[l.film_b[f] + r];
      for (int j = 0; j < E; ++j) acc += p[l.film_w[f] + static_cast<std::size_t>(r) * E + j] * act->embed[j];
      m[r] = acc;
    }
  }

  act->conv_in.resize(kConvLayers);
  act->pre.resize(kFilmLayers);
  act->z.resize(kFilmLayers);

  // Runs conv layer i on `input` (length in_len), modulation and SiLU.
  auto hidden = [&](int i, std::vector<double> input, int in_len) {
    const int out_len = act->lens[i];
    act->conv_in[i] = std::move(input);
    std::vector<double> a(static_cast<std::size_t>(C) * out_len);
    conv_forward(p + l.conv_w[i], p + l.conv_b[i], shapes[i], K, act->conv_in[i].data(), in_len, a.data(), out_len);
    std::vector<double> z(a.size()), h(a.size());
    const auto& m = act->mod[i];
    for (int c = 0; c < C; ++c) {
      const double g = 1.0 + m[c];
      const double b = m[C + c];
      for (int t = 0; t < out_len; ++t) {
        const std::size_t idx = static_cast<std::size_t>(c) * out_len + t;
        z[idx] = a[idx] * g + b;
        h[idx] = z[idx] * sigmoid(z[idx]);
      }
    }
    act->pre[i] = std::move(a);
    act->z[i] = std::move(z);
    return h;
  };

  std::vector<double> u(x.begin(), x.end());
  for (double& v : u) v *= act->in_scale;

  auto h0 = hidden(0, std::move(u), n);
  auto h1 = hidden(1, h0, n);
  auto h2 = hidden(2, h1, n / 2);
  auto h3 = hidden(3, h2, n / 4);
  for (std::size_t i = 0; i < h3.size(); ++i) h3[i] += h2[i];
  auto h4 = hidden(4, upsample2(h3, C, n / 4), n / 2);
  for (std::size_t i = 0; i < h4.size(); ++i) h4[i] += h1[i];
  auto h5 = hidden(5, upsample2(h4, C, n / 2), n);
  for (std::size_t i = 0; i < h5.size(); ++i) h5[i] += h0[i];
  act->conv_in[6] = std::move(h5);
  return act;
}

State ToyDenoiser::backward(const Activations& act, std::span<const double> dout,
                            std::span<double> param_grad) const {
  const Layout l = make_layout(topology_);
  const auto shapes = conv_shapes(topology_.channels);
  const int C = topology_.channels;
  const int K = topology_.kernel;
  const int E = topology_.embed_dim;
  const int n = act.lens[0];
  const double* p = params_.data();
  const bool want_params = !param_grad.empty();
  double* g = want_params ? param_grad.data() : nullptr;
  std::vector<double> dembed(static_cast<std::size_t>(E), 0.0);

  auto conv_back = [&](int i, const std::vector<double>& dconv_out, int in_len) {
    std::vector<double> din(static_cast<std::size_t>(shapes[i].in_ch) * in_len, 0.0);
    conv_backward(p + l.conv_w[i], shapes[i], K, act.conv_in[i].data(), in_len, dconv_out.data(), act.lens[i],
                  want_params ? g + l.conv_w[i] : nullptr, want_params ? g + l.conv_b[i] : nullptr, din.data());
    return din;
  };

  // Gradient through SiLU, modulation and conv of hidden layer i; returns
  // the gradient w.r.t. that conv's input.
  auto hidden_back = [&](int i, const std::vector<double>& dh, int in_len) {
    const int len = act.lens[i];
    const auto& m = act.mod[i];
    const auto& a = act.pre[i];
    const auto& z = act.z[i];
    std::vector<double> da(dh.size());
    std::vector<double> dmod(static_cast<std::size_t>(2 * C), 0.0);
    for (int c = 0; c < C; ++c) {
      const double gain = 1.0 + m[c];
      double dg = 0.0, dbeta = 0.0;
      for (int t = 0; t < len; ++t) {
        const std::size_t idx = static_cast<std::size_t>(c) * len + t;
        const double s = sigmoid(z[idx]);
        const double dz = dh[idx] * s * (1.0 + z[idx] * (1.0 - s));
        da[idx] = dz * gain;
        dg += dz * a[idx];
        dbeta += dz;
      }
      dmod[c] = dg;
      dmod[C + c] = dbeta;
    }
    for (int r = 0; r < 2 * C; ++r) {
      if (want_params) {
        g[l.film_b[i] + r] += dmod[r];
        for (int j = 0; j < E; ++j) g[l.film_w[i] + static_cast<std::size_t>(r) * E + j] += dmod[r] * act.embed[j];
      }
      for (int j = 0; j < E; ++j) dembed[j] += p[l.film_w[i] + static_cast<std::size_t>(r) * E + j] * dmod[r];
    }
    return conv_back(i, da, in_len);
  };

  std::vector<double> dout_v(dout.begin(), dout.end());
  auto dh5 = conv_back(6, dout_v, n);
  auto dh0 = dh5;                                   // skip into h5
  auto dup4 = hidden_back(5, dh5, n);
  auto dh4 = upsample2_backward(dup4, C, n / 2);
  auto dh1 = dh4;                                   // skip into h4
  auto dup3 = hidden_back(4, dh4, n / 2);
  auto dh3 = upsample2_backward(dup3, C, n / 4);
  auto dh2 = dh3;                                   // residual around mid
  auto tmp = hidden_back(3, dh3, n / 4);
  for (std::size_t i = 0; i < dh2.size(); ++i) dh2[i] += tmp[i];
  tmp = hidden_back(2, dh2, n / 2);
  for (std::size_t i = 0; i < dh1.size(); ++i) dh1[i] += tmp[i];
  tmp = hidden_back(1, dh1, n);
  for (std::size_t i = 0; i < dh0.size(); ++i) dh0[i] += tmp[i];
  auto du = hidden_back(0, dh0, n);

  if (want_params && act.label) {
    for (int j = 0; j < E; ++j) g[l.class_table + static_cast<std::size_t>(*act.label) * E + j] += dembed[j];
  }
  for (double& v : du) v *= act.in_scale;
  return du;
}

namespace {

State output_layer(const ToyDenoiser::Activations& act, std::span<const double> params,
                   const DenoiserTopology& topo) {
  const Layout l = make_layout(topo);
  const int n = act.lens[6];
  State out(static_cast<std::size_t>(n));
  conv_forward(params.data() + l.conv_w[6], params.data() + l.conv_b[6], conv_shapes(topo.channels)[6],
               topo.kernel, act.conv_in[6].data(), n, out.data(), n);
  return out;
}

}  // namespace

State ToyDenoiser::predict_noise(std::span<const double> x, int step, Label label) const {
  auto act = forward(x, step, label);
  return output_layer(*act, params_, topology_);
}

State ToyDenoiser::noise_vjp(std::span<const double> x, int step, std::span<const double> v, Label label) const {
  if (v.size() != x.size()) throw DimensionError("noise_vjp: v and x lengths differ");
  auto act = forward(x, step, label);
  return backward(*act, v, {});
}

State ToyDenoiser::score_impl(std::span<const double> x, int step, Label label) const {
  State eps = predict_noise(x, step, label);
  const double inv = -1.0 / std::sqrt(1.0 - schedule_.alpha_bar(step));
  for (double& v : eps) v *= inv;
  return eps;
}

State ToyDenoiser::vjp_impl(std::span<const double> x, int step, std::span<const double> v, Label label) const {
  State d = noise_vjp(x, step, v, label);
  const double inv = -1.0 / std::sqrt(1.0 - schedule_.alpha_bar(step));
  for (double& e : d) e *= inv;
  return d;
}

Linearization ToyDenoiser::linearize_impl(std::span<const double> x, int step, Label label) const {
  auto act = forward(x, step, label);
  const double inv = -1.0 / std::sqrt(1.0 - schedule_.alpha_bar(step));
  Linearization lin;
  lin.score = output_layer(*act, params_, topology_);
  for (double& v : lin.score) v *= inv;
  lin.vjp = [this, act, inv](std::span<const double> v) {
    if (v.size() != static_cast<std::size_t>(act->lens[0])) throw DimensionError("vjp: vector length mismatch");
    State d = backward(*act, v, {});
    for (double& e : d) e *= inv;
    return d;
  };
  return lin;
}

double ToyDenoiser::loss_and_gradient(std::span<const State> noised, std::span<const int> steps,
                                      std::span<const Label> labels, std::span<const State> noise,
                                      std::vector<double>& grad) const {
  if (noised.size() != steps.size() || noised.size() != labels.size() || noised.size() != noise.size() ||
      noised.empty()) {
    throw DimensionError("loss_and_gradient: batch arrays differ in size");
  }
  grad.assign(params_.size(), 0.0);
  std::size_t total = 0;
  for (const auto& s : noised) total += s.size();
  const double scale = 2.0 / static_cast<double>(total);
  double loss = 0.0;
  for (std::size_t b = 0; b < noised.size(); ++b) {
    if (noise[b].size() != noised[b].size()) throw DimensionError("loss_and_gradient: noise length mismatch");
    auto act = forward(noised[b], steps[b], labels[b]);
    const State pred = output_layer(*act, params_, topology_);
    State dout(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double r = pred[i] - noise[b][i];
      loss += r * r;
      dout[i] = scale * r;
    }
    backward(*act, dout, grad);
  }
  return loss / static_cast<double>(total);
}

namespace {

struct Batch {
  std::vector<State> noised, noise;
  std::vector<int> steps;
  std::vector<Label> labels;
};

Batch draw_batch(std::span<const TrainingExample> data, const NoiseSchedule& schedule, std::size_t crop, int size,
                 std::mt19937_64& rng) {
  Batch b;
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::uniform_int_distribution<int> step_dist(0, schedule.steps() - 1);
  std::normal_distribution<double> gauss;
  for (int i = 0; i < size; ++i) {
    const auto& ex = data[pick(rng)];
    const std::size_t len = crop == 0 ? ex.samples.size() : crop;
    const std::size_t start =
        std::uniform_int_distribution<std::size_t>(0, ex.samples.size() - len)(rng);
    const int step = step_dist(rng);
    State eps(len);
    for (auto& v : eps) v = gauss(rng);
    b.noised.push_back(noise_to_level(std::span(ex.samples).subspan(start, len), step, eps, schedule));
    b.noise.push_back(std::move(eps));
    b.steps.push_back(step);
    b.labels.push_back(ex.label);
  }
  return b;
}

void validate_dataset(std::span<const TrainingExample> data, std::size_t crop) {
  if (data.empty()) throw ConfigError("empty dataset");
  const std::size_t n = data.front().samples.size();
  for (const auto& ex : data) {
    if (ex.samples.size() != n) throw DimensionError("training signals must all have the same length");
  }
  const std::size_t len = crop == 0 ? n : crop;
  if (len > n) throw ConfigError("crop length exceeds signal length");
  if (len % 4 != 0) throw ConfigError("training crop length must be a multiple of 4");
}

constexpr std::uint64_t kEvalStream = 0x5EEDE7A1ULL;

}  // namespace

double evaluate_denoiser(const ToyDenoiser& model, std::span<const TrainingExample> dataset,
                         const TrainConfig& config, std::uint64_t seed) {
  validate_dataset(dataset, config.crop);
  std::mt19937_64 rng(seed ^ kEvalStream);
  const Batch b = draw_batch(dataset, model.schedule(), config.crop, config.eval_batch, rng);
  double loss = 0.0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < b.noised.size(); ++i) {
    const State pred = model.predict_noise(b.noised[i], b.steps[i], b.labels[i]);
    for (std::size_t j = 0; j < pred.size(); ++j) loss += (pred[j] - b.noise[i][j]) * (pred[j] - b.noise[i][j]);
    total += pred.size();
  }
  return loss / static_cast<double>(total);
}

TrainResult train_denoiser(std::span<const TrainingExample> dataset, const NoiseSchedule& schedule,
                           const TrainConfig& config, std::uint64_t seed, std::vector<std::string> class_vocab) {
  validate_dataset(dataset, config.crop);
  if (config.steps < 1 || config.batch < 1 || !(config.lr > 0.0)) throw ConfigError("invalid training config");

  DenoiserTopology topo = config.topology;
  if (!class_vocab.empty()) topo.class_count = static_cast<int>(class_vocab.size());
  double sq = 0.0;
  std::size_t count = 0;
  for (const auto& ex : dataset) {
    if (ex.label && (*ex.label < 0 || *ex.label >= topo.class_count)) {
      throw LabelError("training example label outside vocabulary");
    }
    for (double v : ex.samples) sq += v * v;
    count += ex.samples.size();
  }
  topo.data_std = std::sqrt(sq / static_cast<double>(count));
  if (!(topo.data_std > 0.0)) topo.data_std = 1.0;

  ToyDenoiser model = ToyDenoiser::initialize(topo, schedule, seed, class_vocab);
  std::vector<double> params(model.parameters().begin(), model.parameters().end());
  std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0), grad;

  TrainResult result{model, {}, 0.0, 0.0};
  result.initial_eval_loss = evaluate_denoiser(model, dataset, config, seed);
  result.loss_history.reserve(static_cast<std::size_t>(config.steps));

  std::mt19937_64 rng(seed);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  for (int step = 0; step < config.steps; ++step) {
    const Batch b = draw_batch(dataset, schedule, config.crop, config.batch, rng);
    const double loss = model.loss_and_gradient(b.noised, b.steps, b.labels, b.noise, grad);
    if (!std::isfinite(loss)) throw TrainingError("training loss became non-finite", step);
    result.loss_history.push_back(loss);

    const double gnorm = std::sqrt(std::inner_product(grad.begin(), grad.end(), grad.begin(), 0.0));
    if (!std::isfinite(gnorm)) throw TrainingError("gradient became non-finite", step);
    const double clip = config.grad_clip > 0.0 && gnorm > config.grad_clip ? config.grad_clip / gnorm : 1.0;
    const double progress = static_cast<double>(step) / config.steps;
    const double lr = config.lr * (0.1 + 0.45 * (1.0 + std::cos(3.14159265358979323846 * progress)));
    const double c1 = 1.0 - std::pow(kBeta1, step + 1);
    const double c2 = 1.0 - std::pow(kBeta2, step + 1);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double gi = grad[i] * clip;
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * gi;
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * gi * gi;
      params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
    }
    model = ToyDenoiser(topo, schedule, params, class_vocab);
  }
  result.model = model;
  result.final_eval_loss = evaluate_denoiser(model, dataset, config, seed);
  return result;
}

}  // namespace sepdiff
