// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "json.hpp"
#include "sepdiff/errors.hpp"

namespace sepdiff {

double si_sdr(std::span<const double> est, std::span<const double> ref) {
  if (est.size() != ref.size()) throw MetricError("si_sdr: estimate and reference lengths differ");
  double rr = 0.0, er = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    rr += ref[i] * ref[i];
    er += est[i] * ref[i];
  }
  if (!(rr > 0.0)) throw MetricError("si_sdr undefined for a silent reference");
  const double a = er / rr;
  double ss = 0.0, ee = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double s = a * ref[i];
    const double e = est[i] - s;
    ss += s * s;
    ee += e * e;
  }
  if (!(ss > 0.0)) return -kSiSdrClamp;  // silent or orthogonal estimate
  if (!(ee > 0.0)) return kSiSdrClamp;
  return std::clamp(10.0 * std::log10(ss / ee), -kSiSdrClamp, kSiSdrClamp);
}

EvalEntry evaluate(std::span<const std::vector<double>> ests, std::span<const std::vector<double>> refs) {
  const std::size_t K = refs.size();
  if (K == 0 || ests.size() != K) throw MetricError("evaluate: need as many estimates as references");
  if (K > 4) throw MetricError("evaluate: permutation search supports at most 4 sources");
  std::vector<std::vector<double>> table(K, std::vector<double>(K));
  for (std::size_t r = 0; r < K; ++r) {
    for (std::size_t e = 0; e < K; ++e) table[r][e] = si_sdr(ests[e], refs[r]);
  }
  std::vector<int> perm(K);
  std::iota(perm.begin(), perm.end(), 0);
  EvalEntry best;
  double best_sum = -std::numeric_limits<double>::infinity();
  do {
    double sum = 0.0;
    for (std::size_t r = 0; r < K; ++r) sum += table[r][perm[r]];
    if (sum > best_sum) {
      best_sum = sum;
      best.permutation = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (std::size_t r = 0; r < K; ++r) best.si_sdr.push_back(table[r][best.permutation[r]]);
  best.mean = best_sum / static_cast<double>(K);
  best.failure = best.mean < 0.0;
  return best;
}

EvalReport EvalReport::aggregate(std::vector<EvalEntry> entries) {
  EvalReport rep;
  rep.entries = std::move(entries);
  if (rep.entries.empty()) return rep;
  double sum = 0.0;
  std::size_t failures = 0;
  for (const auto& e : rep.entries) {
    sum += e.mean;
    failures += e.failure ? 1 : 0;
  }
  rep.mean_si_sdr = sum / static_cast<double>(rep.entries.size());
  rep.failure_rate = static_cast<double>(failures) / static_cast<double>(rep.entries.size());
  return rep;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["mean_si_sdr"] = mean_si_sdr;
  j["failure_rate"] = failure_rate;
  j["mixtures"] = nlohmann::json::array();
  for (const auto& e : entries) {
    j["mixtures"].push_back(
        {{"id", e.id}, {"si_sdr", e.si_sdr}, {"permutation", e.permutation}, {"mean", e.mean}, {"failure", e.failure}});
  }
  return j.dump(2) + "\n";
}

std::string EvalReport::to_csv() const {
  std::string out = "id,source,matched_estimate,si_sdr,mixture_mean,failure\n";
  char buf[256];
  for (const auto& e : entries) {
    for (std::size_t k = 0; k < e.si_sdr.size(); ++k) {
      std::snprintf(buf, sizeof(buf), ",%zu,%d,%.17g,%.17g,%d\n", k + 1, e.permutation[k] + 1, e.si_sdr[k], e.mean,
                    e.failure ? 1 : 0);
      out += e.id;
      out += buf;
    }
  }
  return out;
}

}  // namespace sepdiff
