// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <benchmark/benchmark.h>

#include <random>

#include "sepdiff/gaussian.hpp"
#include "sepdiff/guidance.hpp"
#include "sepdiff/separator.hpp"
#include "sepdiff/signal.hpp"
#include "sepdiff/tfnet.hpp"
#include "sepdiff/toy_denoiser.hpp"

using namespace sepdiff;

namespace {

const NoiseSchedule& schedule() {
  static const NoiseSchedule s = NoiseSchedule::linear(200, 1e-4, 2e-2);
  return s;
}

std::vector<double> noise(std::size_t n, std::uint64_t seed, double scale = 0.1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

ToyDenoiser toy(int channels, std::uint64_t seed) {
  DenoiserTopology topo;
  topo.channels = channels;
  return ToyDenoiser::initialize(topo, schedule(), seed);
}

void BM_Stft(benchmark::State& state) {
  const auto x = noise(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(stft(x, {}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Stft)->Arg(1024)->Arg(64000);

void BM_StftRoundTrip(benchmark::State& state) {
  const auto x = noise(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(istft(stft(x, {}), x.size()));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_StftRoundTrip)->Arg(64000);

void BM_ToyScore(benchmark::State& state) {
  const auto m = toy(static_cast<int>(state.range(1)), 3);
  const auto x = noise(static_cast<std::size_t>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(m.score(x, 100));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ToyScore)->Args({1024, 16})->Args({64000, 16});

void BM_ToyScoreVjp(benchmark::State& state) {
  const auto m = toy(16, 5);
  const auto x = noise(static_cast<std::size_t>(state.range(0)), 6);
  const auto v = noise(x.size(), 7);
  for (auto _ : state) benchmark::DoNotOptimize(m.score_vjp(x, 100, v));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ToyScoreVjp)->Arg(1024)->Arg(64000);

void BM_GaussianScore(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto p = GaussianPrior::diagonal(Eigen::VectorXd::Zero(n), Eigen::VectorXd::Constant(n, 0.5), schedule());
  const auto x = noise(static_cast<std::size_t>(n), 8);
  for (auto _ : state) benchmark::DoNotOptimize(p.score(x, 50));
}
BENCHMARK(BM_GaussianScore)->Arg(64)->Arg(256);

void BM_ReconsGrad(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const auto a = toy(16, 9), b = toy(16, 10);
  const std::vector<const ScoreModel*> models = {&a, &b};
  const std::vector<State> xt = {noise(n, 11), noise(n, 12)};
  const auto y = noise(n, 13);
  const ReconsLossConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(recons_grad(xt, 100, y, models, {}, GradientMode::kBackprop, cfg));
  }
}
BENCHMARK(BM_ReconsGrad)->Arg(1024)->Arg(16000);

void BM_SeparateToy(benchmark::State& state) {
  SeparationProblem p;
  p.models = {std::make_shared<ToyDenoiser>(toy(16, 14)), std::make_shared<ToyDenoiser>(toy(16, 15))};
  p.y = noise(1024, 16);
  p.init.t_star = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(separate(p));
}
BENCHMARK(BM_SeparateToy)->Arg(150)->Unit(benchmark::kMillisecond);

void BM_TfNetForward(benchmark::State& state) {
  const tfnet::TfNetConfig cfg;
  const auto p = tfnet::TfNetParams::initialize(cfg, 17);
  tfnet::Tensor3 x(2, cfg.F, cfg.T);
  x.data = noise(x.data.size(), 18, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(tfnet::tfnet_forward(x, 100, std::nullopt, p));
}
BENCHMARK(BM_TfNetForward)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
