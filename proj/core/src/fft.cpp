// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepdiff/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "sepdiff/errors.hpp"

namespace sepdiff::fft {

namespace {

enum class Direction { kForward, kInverse };

// The FFTW planner is not reentrant, executing an existing plan on new arrays
// is. Plans are created once under the lock and never destroyed.
fftw_plan get_plan(Direction dir, int n) {
  static std::mutex mu;
  static std::map<std::pair<Direction, int>, fftw_plan> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(dir, n);
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  std::vector<double> real(static_cast<std::size_t>(n));
  std::vector<std::complex<double>> spec(static_cast<std::size_t>(n / 2 + 1));
  auto* cplx = reinterpret_cast<fftw_complex*>(spec.data());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  fftw_plan plan = dir == Direction::kForward
                       ? fftw_plan_dft_r2c_1d(n, real.data(), cplx, flags)
                       : fftw_plan_dft_c2r_1d(n, cplx, real.data(), flags);
  if (plan == nullptr) throw Error("FFTW failed to create a plan of length " + std::to_string(n));
  cache.emplace(key, plan);
  return plan;
}

}  // namespace

void rfft(std::span<const double> in, std::span<std::complex<double>> out) {
  const int n = static_cast<int>(in.size());
  if (n < 1 || out.size() != static_cast<std::size_t>(n / 2 + 1)) {
    throw DimensionError("rfft: output must hold n/2+1 bins");
  }
  fftw_plan plan = get_plan(Direction::kForward, n);
  std::vector<double> buf(in.begin(), in.end());
  fftw_execute_dft_r2c(plan, buf.data(), reinterpret_cast<fftw_complex*>(out.data()));
}

void irfft_unnormalized(std::span<const std::complex<double>> in, std::span<double> out) {
  const int n = static_cast<int>(out.size());
  if (n < 1 || in.size() != static_cast<std::size_t>(n / 2 + 1)) {
    throw DimensionError("irfft: input must hold n/2+1 bins");
  }
  fftw_plan plan = get_plan(Direction::kInverse, n);
  // c2r overwrites its input.
  std::vector<std::complex<double>> buf(in.begin(), in.end());
  buf.front().imag(0.0);
  if (n % 2 == 0) buf.back().imag(0.0);
  fftw_execute_dft_c2r(plan, reinterpret_cast<fftw_complex*>(buf.data()), out.data());
}

}  // namespace sepdiff::fft
