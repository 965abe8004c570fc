// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace sepdiff {

inline constexpr int kDefaultRate = 16000;

/// Mono sample buffer at a fixed rate.
struct Waveform {
  /// Samples beyond the nominal [-1, 1] range are tolerated up to this bound.
  static constexpr double kHeadroom = 4.0;

  std::vector<double> samples;
  int rate = kDefaultRate;

  std::size_t size() const noexcept { return samples.size(); }

  /// Throws NumericError for non-finite samples or samples beyond kHeadroom.
  void validate() const;
};

struct StftParams {
  int window_len = 510;
  int hop = 255;
};

/// One-sided complex STFT, stored frame-major: data[frame * bins + bin].
struct Spectrogram {
  int frames = 0;
  int bins = 0;
  int window_len = 0;
  int hop = 0;
  std::string window = "sqrt-hann";
  std::vector<std::complex<double>> data;

  std::complex<double>& at(int frame, int bin) { return data[static_cast<std::size_t>(frame) * bins + bin]; }
  const std::complex<double>& at(int frame, int bin) const {
    return data[static_cast<std::size_t>(frame) * bins + bin];
  }
};

/// Periodic square-root Hann window of length n.
std::vector<double> sqrt_hann_window(int n);

/// Frames produced by stft() for a signal of `length` samples: 1 + length / hop.
int stft_frame_count(std::size_t length, const StftParams& params);

/// Centered STFT: the signal is reflection-padded by window_len/2 on each
/// side, frames start every `hop` samples of the padded signal, each frame is
/// weighted by the sqrt-Hann window and transformed with an unnormalized DFT.
Spectrogram stft(std::span<const double> x, const StftParams& params);

/// Weighted overlap-add inverse of stft(). Requires a hop for which the
/// squared window satisfies constant overlap-add.
std::vector<double> istft(const Spectrogram& spec, std::size_t length);

/// Transpose of the real-linear map x -> stft(x) (spectrogram viewed as real
/// and imaginary pairs), including the reflection padding. Used to pull
/// gradients with respect to STFT coefficients back to the waveform.
std::vector<double> stft_adjoint(const Spectrogram& grad, std::size_t length);

/// Throws ConfigError unless window_len is even, 0 < hop <= window_len and
/// the squared window is COLA at this hop.
void check_cola(const StftParams& params);

double rms(std::span<const double> x);
/// 20 log10(rms); -inf for silence.
double rms_db(std::span<const double> x);
/// Copy of x scaled so that rms_db(result) == target_db. Throws IngestionError
/// for a silent input (RMS undefined as a scale reference).
std::vector<double> scale_to_rms_db(std::span<const double> x, double target_db);
/// Truncates or zero-pads at the end.
std::vector<double> crop_or_pad(std::span<const double> x, std::size_t length);
/// Delays x by `offset` samples (zero fill), keeping the original length.
std::vector<double> delay(std::span<const double> x, std::size_t offset);

/// Windowed-sinc (Kaiser) sample-rate conversion. Output length is
/// round(x.size() * to_rate / from_rate).
std::vector<double> resample(std::span<const double> x, int from_rate, int to_rate);

enum class WavEncoding { kFloat32, kPcm16 };

/// Reads PCM16 or float32 RIFF/WAVE; multichannel input is averaged to mono.
/// When target_rate > 0 and differs from the file rate the signal is resampled.
Waveform read_wav(const std::filesystem::path& path, int target_rate = kDefaultRate);
void write_wav(const std::filesystem::path& path, const Waveform& w,
               WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace sepdiff
