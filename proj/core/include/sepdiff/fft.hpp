// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <span>

namespace sepdiff::fft {

// Real-input DFT of any length n: out[k] = sum_j in[j] exp(-2 pi i j k / n),
// k = 0..n/2. Plans are cached per length; calls are thread-safe.
void rfft(std::span<const double> in, std::span<std::complex<double>> out);

// Hermitian inverse without the 1/n factor. `in` holds n/2+1 bins; the
// imaginary parts of bin 0 (and bin n/2 for even n) are ignored.
void irfft_unnormalized(std::span<const std::complex<double>> in, std::span<double> out);

}  // namespace sepdiff::fft
