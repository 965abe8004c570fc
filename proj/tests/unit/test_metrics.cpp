// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "sepdiff/errors.hpp"
#include "sepdiff/metrics.hpp"

using namespace sepdiff;

namespace {

std::vector<std::vector<double>> random_refs(int K, std::size_t n, std::mt19937_64& rng) {
  std::vector<std::vector<double>> out;
  for (int k = 0; k < K; ++k) out.push_back(oracle::random_vec(n, rng));
  return out;
}

}  // namespace

TEST_CASE("si_sdr") {
  std::mt19937_64 rng(1);
  const auto ref = oracle::random_vec(500, rng);

  CHECK(si_sdr(ref, ref) == kSiSdrClamp);
  std::vector<double> scaled(ref);
  for (auto& v : scaled) v *= 3.7;
  CHECK(si_sdr(scaled, ref) == kSiSdrClamp);

  SUBCASE("orthogonal noise of equal energy gives 0 dB") {
    auto noise = oracle::random_vec(500, rng);
    const double a = oracle::dot(noise, ref) / oracle::dot(ref, ref);
    for (std::size_t i = 0; i < 500; ++i) noise[i] -= a * ref[i];
    const double s = oracle::norm(ref) / oracle::norm(noise);
    std::vector<double> est(500);
    for (std::size_t i = 0; i < 500; ++i) est[i] = ref[i] + s * noise[i];
    CHECK(std::abs(si_sdr(est, ref)) < 1e-10);
  }
  SUBCASE("matches the oracle and is exactly scale invariant") {
    for (int trial = 0; trial < 20; ++trial) {
      auto est = ref;
      const auto e = oracle::random_vec(500, rng, 0.1 + trial * 0.2);
      for (std::size_t i = 0; i < 500; ++i) est[i] += e[i];
      const double v = si_sdr(est, ref);
      CHECK(v == doctest::Approx(oracle::si_sdr(est, ref)).epsilon(1e-10));
      for (double alpha : {1e-3, 0.5, 2.0, 1e4}) {
        auto s = est;
        for (auto& x : s) x *= alpha;
        CHECK(si_sdr(s, ref) == doctest::Approx(v).epsilon(1e-12));
      }
    }
  }
  SUBCASE("errors and clamps") {
    CHECK_THROWS_AS(si_sdr(ref, std::vector<double>(500, 0.0)), MetricError);
    CHECK_THROWS_AS(si_sdr(std::vector<double>(3, 1.0), ref), MetricError);
    CHECK(si_sdr(std::vector<double>(500, 0.0), ref) == -kSiSdrClamp);
  }
}

TEST_CASE("permutation search") {
  std::mt19937_64 rng(2);
  SUBCASE("swapped estimates resolve to the clamp") {
    const auto refs = random_refs(2, 300, rng);
    const std::vector<std::vector<double>> ests = {refs[1], refs[0]};
    const auto e = evaluate(ests, refs);
    CHECK(e.permutation == std::vector<int>{1, 0});
    CHECK(e.mean == kSiSdrClamp);
    CHECK_FALSE(e.failure);
  }
  SUBCASE("every permutation of the estimates gives the same report") {
    for (int K : {2, 3, 4}) {
      const auto refs = random_refs(K, 200, rng);
      std::vector<std::vector<double>> ests;
      for (int k = 0; k < K; ++k) {
        auto e = refs[k];
        const auto n = oracle::random_vec(200, rng, 0.3 + 0.2 * k);
        for (std::size_t i = 0; i < 200; ++i) e[i] += n[i];
        ests.push_back(e);
      }
      const auto base = evaluate(ests, refs);
      std::vector<int> order(K);
      for (int k = 0; k < K; ++k) order[k] = k;
      do {
        std::vector<std::vector<double>> shuffled;
        for (int k : order) shuffled.push_back(ests[k]);
        const auto r = evaluate(shuffled, refs);
        CHECK(r.mean == base.mean);
        CHECK(r.si_sdr == base.si_sdr);
        CHECK(r.failure == base.failure);
        for (int k = 0; k < K; ++k) CHECK(shuffled[r.permutation[k]] == ests[base.permutation[k]]);
      } while (std::next_permutation(order.begin(), order.end()));
    }
  }
  SUBCASE("pure-noise estimates fail") {
    const auto refs = random_refs(2, 1000, rng);
    const auto ests = random_refs(2, 1000, rng);
    const auto e = evaluate(ests, refs);
    CHECK(e.mean < 0.0);
    CHECK(e.failure);
  }
  SUBCASE("more than four sources") {
    const auto refs = random_refs(5, 10, rng);
    CHECK_THROWS_AS(evaluate(refs, refs), MetricError);
  }
}

TEST_CASE("failure rate on a hand-computed fixture") {
  // Per-mixture means 5, -1, 0, -0.5: two fail (strictly below 0 dB).
  auto entry = [](double a, double b) {
    EvalEntry e;
    e.si_sdr = {a, b};
    e.mean = 0.5 * (a + b);
    e.failure = e.mean < 0.0;
    return e;
  };
  const auto r = EvalReport::aggregate({entry(4, 6), entry(-3, 1), entry(2, -2), entry(-1, 0)});
  CHECK(r.failure_rate == 0.5);
  CHECK(r.mean_si_sdr == doctest::Approx((5.0 - 1.0 + 0.0 - 0.5) / 4));
  CHECK_FALSE(r.entries[2].failure);
}

TEST_CASE("report serialization") {
  std::mt19937_64 rng(3);
  const auto refs = random_refs(2, 100, rng);
  auto e = evaluate(refs, refs);
  e.id = "m0";
  const auto r = EvalReport::aggregate({e});
  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j.at("mean_si_sdr").get<double>() == kSiSdrClamp);
  CHECK(j.at("mixtures").size() == 1);
  const std::string csv = r.to_csv();
  CHECK(csv.rfind("id,source,matched_estimate,si_sdr,mixture_mean,failure\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
