// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <span>
#include <string>
#include <vector>

namespace sepdiff {

inline constexpr double kSiSdrClamp = 100.0;

/// Scale-invariant SDR in dB, clamped to [-100, 100]. Throws MetricError
/// for a silent reference or a length mismatch.
double si_sdr(std::span<const double> est, std::span<const double> ref);

struct EvalEntry {
  std::string id;
  std::vector<double> si_sdr;    ///< per reference, in reference order
  std::vector<int> permutation;  ///< permutation[k] = estimate matched to reference k
  double mean = 0.0;
  bool failure = false;          ///< mean < 0 dB
};

/// Exhaustive permutation search (K <= 4) maximizing the mean SI-SDR.
/// Ties resolve to the lexicographically first permutation.
EvalEntry evaluate(std::span<const std::vector<double>> ests, std::span<const std::vector<double>> refs);

struct EvalReport {
  std::vector<EvalEntry> entries;
  double mean_si_sdr = 0.0;   ///< mean over mixtures of the per-mixture mean
  double failure_rate = 0.0;  ///< fraction of mixtures flagged as failures

  static EvalReport aggregate(std::vector<EvalEntry> entries);
  std::string to_json() const;
  /// One row per mixture-source: id,source,matched_estimate,si_sdr,mixture_mean,failure
  std::string to_csv() const;
};

}  // namespace sepdiff
