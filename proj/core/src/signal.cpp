// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepdiff/signal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "sepdiff/errors.hpp"
#include "sepdiff/fft.hpp"

namespace sepdiff {

void Waveform::validate() const {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double v = samples[i];
    if (!std::isfinite(v)) throw NumericError("waveform sample " + std::to_string(i) + " is not finite");
    if (std::abs(v) > kHeadroom) {
      throw NumericError("waveform sample " + std::to_string(i) + " exceeds headroom (" +
                         std::to_string(v) + ")");
    }
  }
  if (rate <= 0) throw ConfigError("waveform rate must be positive");
}

std::vector<double> sqrt_hann_window(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    w[i] = std::sqrt(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n));
  }
  return w;
}

namespace {

void check_basic(const StftParams& p) {
  if (p.window_len < 2 || p.window_len % 2 != 0) {
    throw ConfigError("STFT window length must be even and >= 2, got " + std::to_string(p.window_len));
  }
  if (p.hop <= 0 || p.hop > p.window_len) {
    throw ConfigError("STFT hop must be in (0, window_len], got " + std::to_string(p.hop));
  }
}

// Padded index -> original index under reflection padding of `pad` samples.
std::size_t reflect_index(std::ptrdiff_t j, std::ptrdiff_t pad, std::ptrdiff_t n) {
  std::ptrdiff_t i = j - pad;
  if (i < 0) i = -i;
  if (i >= n) i = 2 * (n - 1) - i;
  return static_cast<std::size_t>(i);
}

}  // namespace

int stft_frame_count(std::size_t length, const StftParams& params) {
  return 1 + static_cast<int>(length / static_cast<std::size_t>(params.hop));
}

void check_cola(const StftParams& p) {
  check_basic(p);
  const auto w = sqrt_hann_window(p.window_len);
  std::vector<double> acc(static_cast<std::size_t>(p.hop), 0.0);
  for (int n = 0; n < p.window_len; ++n) acc[n % p.hop] += w[n] * w[n];
  const auto [lo, hi] = std::minmax_element(acc.begin(), acc.end());
  if (*hi - *lo > 1e-9 * *hi) {
    throw ConfigError("window " + std::to_string(p.window_len) + " / hop " + std::to_string(p.hop) +
                      " does not satisfy constant overlap-add");
  }
}

Spectrogram stft(std::span<const double> x, const StftParams& params) {
  check_basic(params);
  const int W = params.window_len;
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  if (n < W) {
    throw DimensionError("stft: signal of " + std::to_string(n) + " samples is shorter than one frame (" +
                         std::to_string(W) + ")");
  }
  const std::ptrdiff_t pad = W / 2;
  const auto w = sqrt_hann_window(W);

  Spectrogram s;
  s.window_len = W;
  s.hop = params.hop;
  s.frames = stft_frame_count(x.size(), params);
  s.bins = W / 2 + 1;
  s.data.assign(static_cast<std::size_t>(s.frames) * s.bins, {});

  std::vector<double> frame(static_cast<std::size_t>(W));
  for (int f = 0; f < s.frames; ++f) {
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(f) * params.hop;
    for (int j = 0; j < W; ++j) frame[j] = w[j] * x[reflect_index(start + j, pad, n)];
    fft::rfft(frame, std::span(s.data).subspan(static_cast<std::size_t>(f) * s.bins, s.bins));
  }
  return s;
}

std::vector<double> istft(const Spectrogram& spec, std::size_t length) {
  const StftParams params{spec.window_len, spec.hop};
  check_cola(params);
  const int W = spec.window_len;
  if (spec.bins != W / 2 + 1 || spec.data.size() != static_cast<std::size_t>(spec.frames) * spec.bins) {
    throw DimensionError("istft: spectrogram framing metadata is inconsistent");
  }
  const auto w = sqrt_hann_window(W);
  const std::size_t padded = static_cast<std::size_t>(spec.frames - 1) * spec.hop + W;
  std::vector<double> acc(padded, 0.0), wsum(padded, 0.0);
  std::vector<double> frame(static_cast<std::size_t>(W));
  for (int f = 0; f < spec.frames; ++f) {
    fft::irfft_unnormalized(std::span(spec.data).subspan(static_cast<std::size_t>(f) * spec.bins, spec.bins),
                            frame);
    const std::size_t start = static_cast<std::size_t>(f) * spec.hop;
    for (int j = 0; j < W; ++j) {
      acc[start + j] += w[j] * frame[j] / W;
      wsum[start + j] += w[j] * w[j];
    }
  }
  std::vector<double> out(length, 0.0);
  const std::size_t pad = static_cast<std::size_t>(W / 2);
  for (std::size_t i = 0; i < length && i + pad < padded; ++i) {
    const double ws = wsum[i + pad];
    if (ws > 1e-10) out[i] = acc[i + pad] / ws;
  }
  return out;
}

std::vector<double> stft_adjoint(const Spectrogram& grad, std::size_t length) {
  const int W = grad.window_len;
  check_basic({W, grad.hop});
  if (grad.bins != W / 2 + 1 || grad.frames != stft_frame_count(length, {W, grad.hop})) {
    throw DimensionError("stft_adjoint: spectrogram does not match signal length");
  }
  const auto w = sqrt_hann_window(W);
  const std::ptrdiff_t pad = W / 2;
  const auto n = static_cast<std::ptrdiff_t>(length);
  std::vector<double> out(length, 0.0);
  std::vector<std::complex<double>> half(static_cast<std::size_t>(grad.bins));
  std::vector<double> frame(static_cast<std::size_t>(W));
  for (int f = 0; f < grad.frames; ++f) {
    // c2r sums both halves of the Hermitian spectrum, so interior bins are
    // halved to leave sum_k Re(G_k exp(+i 2 pi k j / W)) over the stored bins.
    for (int k = 0; k < grad.bins; ++k) {
      const bool edge = k == 0 || k == W / 2;
      half[k] = edge ? std::complex<double>(grad.at(f, k).real(), 0.0) : 0.5 * grad.at(f, k);
    }
    fft::irfft_unnormalized(half, frame);
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(f) * grad.hop;
    for (int j = 0; j < W; ++j) out[reflect_index(start + j, pad, n)] += w[j] * frame[j];
  }
  return out;
}

double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

double rms_db(std::span<const double> x) {
  const double r = rms(x);
  return r > 0.0 ? 20.0 * std::log10(r) : -std::numeric_limits<double>::infinity();
}

std::vector<double> scale_to_rms_db(std::span<const double> x, double target_db) {
  const double r = rms(x);
  if (!(r > 0.0)) throw IngestionError("cannot scale a silent source to a target RMS");
  const double g = std::pow(10.0, target_db / 20.0) / r;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = g * x[i];
  return out;
}

std::vector<double> crop_or_pad(std::span<const double> x, std::size_t length) {
  std::vector<double> out(length, 0.0);
  std::copy_n(x.begin(), std::min(length, x.size()), out.begin());
  return out;
}

std::vector<double> delay(std::span<const double> x, std::size_t offset) {
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t i = offset; i < x.size(); ++i) out[i] = x[i - offset];
  return out;
}

std::vector<double> resample(std::span<const double> x, int from_rate, int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) throw ConfigError("resample: rates must be positive");
  if (from_rate == to_rate) return {x.begin(), x.end()};

  constexpr int kZeroCrossings = 32;
  constexpr double kKaiserBeta = 8.6;
  const double ratio = static_cast<double>(to_rate) / from_rate;
  const double cutoff = std::min(1.0, ratio) * 0.97;
  const double half_width = kZeroCrossings / cutoff;  // in input samples
  const double norm = std::cyl_bessel_i(0.0, kKaiserBeta);
  const auto n_in = static_cast<std::ptrdiff_t>(x.size());
  const auto n_out = static_cast<std::size_t>(std::llround(static_cast<double>(x.size()) * ratio));

  std::vector<double> out(n_out, 0.0);
  for (std::size_t m = 0; m < n_out; ++m) {
    const double t = static_cast<double>(m) / ratio;
    const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(t - half_width)));
    const auto hi = std::min<std::ptrdiff_t>(n_in - 1, static_cast<std::ptrdiff_t>(std::floor(t + half_width)));
    double acc = 0.0;
    for (std::ptrdiff_t j = lo; j <= hi; ++j) {
      const double d = t - static_cast<double>(j);
      const double u = d / half_width;
      const double win = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - u * u))) / norm;
      const double arg = cutoff * d;
      const double sinc = arg == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
      acc += x[j] * cutoff * sinc * win;
    }
    out[m] = acc;
  }
  return out;
}

}  // namespace sepdiff
