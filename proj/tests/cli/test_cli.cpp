// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Drives the command-line front end in process.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "cli.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "run_config.hpp"
#include "sepdiff/checkpoint.hpp"
#include "sepdiff/mixture.hpp"
#include "sepdiff/separator.hpp"
#include "sepdiff/signal.hpp"
#include "tempdir.hpp"

using namespace sepdiff;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result sepdiff_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

// Rows of a headered CSV keyed by column name; empty cells are kept as "".
std::vector<std::map<std::string, std::string>> read_table(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> cols;
  std::stringstream hs(line);
  for (std::string c; std::getline(hs, c, ',');) cols.push_back(c);
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    std::map<std::string, std::string> row;
    std::stringstream ls(line);
    std::string cell;
    for (const auto& c : cols) {
      if (!std::getline(ls, cell, ',')) cell.clear();
      row[c] = cell;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_tones(const fs::path& dir, int count, std::size_t length, std::uint64_t seed) {
  fs::create_directories(dir);
  std::mt19937_64 rng(seed);
  SynthRecipe tone;
  for (int i = 0; i < count; ++i) {
    const auto s = scale_to_rms_db(synthesize(tone, length, kDefaultRate, rng), -20.0);
    write_wav(dir / ("t" + std::to_string(i) + ".wav"), Waveform{s, kDefaultRate});
  }
}

// Two diagonal Gaussian sources of length n, a mixture drawn from them and a
// config pointing `separate` at the pair. Variances are small enough that one
// posterior sample lies within a few percent of the posterior mean.
struct GaussianCase {
  std::vector<Eigen::VectorXd> mu;
  std::vector<Eigen::MatrixXd> cov;
  fs::path mixture_dir;
  fs::path config;
};

GaussianCase gaussian_case(const fs::path& root, int n, std::uint64_t seed) {
  GaussianCase g;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  json analytic = json::array();
  std::vector<double> y(n, 0.0);
  fs::create_directories(root / "mix" / "m0");
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd m(n), v(n);
    for (int i = 0; i < n; ++i) {
      m[i] = k == 0 ? 0.5 * std::sin(0.3 * i) : 0.4 * std::cos(1.7 * i) - 0.1;
      v[i] = 1e-4 * (1.0 + 0.5 * ((i + k) % 3));
    }
    std::vector<double> s(n);
    for (int i = 0; i < n; ++i) {
      s[i] = m[i] + std::sqrt(v[i]) * gauss(rng);
      y[i] += s[i];
    }
    write_wav(root / "mix" / "m0" / ("s" + std::to_string(k + 1) + ".wav"), Waveform{s, kDefaultRate});
    g.mu.push_back(m);
    g.cov.push_back(v.asDiagonal());
    analytic.push_back({{"mean", std::vector<double>(m.data(), m.data() + n)},
                        {"variance", std::vector<double>(v.data(), v.data() + n)}});
  }
  write_wav(root / "mix" / "m0" / "mix.wav", Waveform{y, kDefaultRate});
  json cfg = {{"prior", {{"kind", "analytic-gaussian"}, {"analytic", analytic}}},
              {"guidance", {{"mode", "exact-jvp"}, {"stft_window", 16}, {"stft_hop", 8}, {"group_count", 4}}}};
  g.mixture_dir = root / "mix";
  g.config = root / "gauss.json";
  std::ofstream(g.config) << cfg.dump(2);
  return g;
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(sepdiff_run({}).code == cli::kExitUsage);
  CHECK(sepdiff_run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(sepdiff_run({"separate", "--guidance", "fancy"}).code == cli::kExitUsage);
  CHECK(sepdiff_run({"--help"}).code == cli::kExitOk);
  testing::TempDir dir("cli");
  std::ofstream(dir / "bad.json") << R"({"sed": 3})";
  const auto r = sepdiff_run({"eval", "--config", (dir / "bad.json").string()});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("sed") != std::string::npos);
}

TEST_CASE("train-prior") {
  testing::TempDir dir("cli");
  write_tones(dir / "data", 6, 512, 1);
  const std::vector<std::string> base = {"train-prior", "--data", (dir / "data").string(), "--steps", "40",
                                         "--batch", "4", "--crop", "0", "--channels", "4",
                                         "--signal-length", "512", "--seed", "3"};
  auto args = base;
  args.insert(args.end(), {"--out", (dir / "a").string()});
  const auto r = sepdiff_run(args);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (const char* f : {"config.json", "prior.ckpt", "train_loss.csv", "train_summary.json"}) {
    CHECK(fs::exists(dir / "a" / f));
  }
  const auto summary = read_json(dir / "a" / "train_summary.json");
  CHECK(summary.at("examples") == 6);
  CHECK(read_table(dir / "a" / "train_loss.csv").size() == 40);

  SUBCASE("reloaded checkpoint reproduces the final evaluation loss") {
    const auto cfg = cli::load_run_config(dir / "a" / "config.json");
    const auto model = load_denoiser(dir / "a" / "prior.ckpt", nullptr);
    std::vector<TrainingExample> data;
    for (int i = 0; i < 6; ++i) {
      data.push_back({crop_or_pad(read_wav(dir / "data" / ("t" + std::to_string(i) + ".wav")).samples, 512), {}});
    }
    const double loss = evaluate_denoiser(model, data, cfg.training.train, cfg.seed);
    CHECK(loss == doctest::Approx(summary.at("final_eval_loss").get<double>()).epsilon(1e-6));
  }
  SUBCASE("identical runs write identical checkpoints") {
    args = base;
    args.insert(args.end(), {"--out", (dir / "b").string()});
    REQUIRE(sepdiff_run(args).code == 0);
    CHECK(slurp(dir / "a" / "prior.ckpt") == slurp(dir / "b" / "prior.ckpt"));
  }
  SUBCASE("class subdirectories become the label vocabulary") {
    write_tones(dir / "cls" / "low", 2, 512, 2);
    write_tones(dir / "cls" / "high", 2, 512, 3);
    REQUIRE(sepdiff_run({"train-prior", "--data", (dir / "cls").string(), "--steps", "5", "--crop", "0",
                         "--channels", "4", "--signal-length", "512", "--out", (dir / "c").string()})
                .code == 0);
    CHECK(read_json(dir / "c" / "train_summary.json").at("class_vocab") == json({"high", "low"}));
    CHECK(load_denoiser(dir / "c" / "prior.ckpt").class_count() == 2);
  }
  SUBCASE("empty dataset") {
    fs::create_directories(dir / "empty");
    const auto e = sepdiff_run({"train-prior", "--data", (dir / "empty").string(), "--out", (dir / "e").string()});
    CHECK(e.code == cli::kExitUsage);
    CHECK(e.err.find("empty dataset") != std::string::npos);
  }
}

TEST_CASE("synth-mix") {
  testing::TempDir dir("cli");
  std::ofstream(dir / "manifest.json") << R"({
    "seed": 11, "length": 2048, "count": 3,
    "sources": [{"synth": {"kind": "tone"}}, {"synth": {"kind": "noise_burst"}}]
  })";
  for (const char* out : {"a", "b"}) {
    REQUIRE(sepdiff_run({"synth-mix", "--manifest", (dir / "manifest.json").string(), "--out", (dir / out).string()})
                .code == 0);
  }
  const auto resolved = read_json(dir / "a" / "manifest.resolved.json");
  REQUIRE(resolved.at("mixtures").size() == 3);
  for (const auto& m : resolved.at("mixtures")) {
    const fs::path id = m.at("id").get<std::string>();
    for (const char* f : {"mix.wav", "s1.wav", "s2.wav"}) {
      CHECK(fs::exists(dir / "a" / "mixtures" / id / f));
      CHECK(slurp(dir / "a" / "mixtures" / id / f) == slurp(dir / "b" / "mixtures" / id / f));
    }
  }
  CHECK(sepdiff_run({"synth-mix", "--out", (dir / "c").string()}).code == cli::kExitUsage);
}

TEST_CASE("separate with analytic gaussian priors") {
  testing::TempDir dir("cli");
  const int n = 64;
  const auto g = gaussian_case(dir.path(), n, 5);
  auto run = [&](const std::string& out, std::vector<std::string> extra) {
    std::vector<std::string> a = {"separate", "--config", g.config.string(), "--mixture", g.mixture_dir.string(),
                                  "--out", (dir / out).string(), "--seed", "4"};
    a.insert(a.end(), extra.begin(), extra.end());
    return sepdiff_run(a);
  };

  SUBCASE("hybrid reaches the posterior means") {
    const auto r = run("h", {"--guidance", "hybrid"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(r.out.find("m0: mean SI-SDR") != std::string::npos);
    const auto y = read_wav(g.mixture_dir / "m0" / "mix.wav").samples;
    const auto want = oracle::gaussian_posterior_means(g.mu, g.cov, Eigen::Map<const Eigen::VectorXd>(y.data(), n));
    for (int k = 0; k < 2; ++k) {
      const auto est = read_wav(dir / "h" / "m0" / ("s" + std::to_string(k + 1) + ".wav")).samples;
      CHECK(oracle::rel_l2(est, std::vector<double>(want[k].data(), want[k].data() + n)) < 0.05);
    }
    const auto trace = GuidanceTrace::read_csv(dir / "h" / "m0" / "trace.csv");
    CHECK(trace.records.size() == 2 * 150);
    CHECK(trace.records.front().si_sdr.has_value());
    const auto cfg = read_json(dir / "h" / "m0" / "config.json");
    CHECK(cfg.at("signal_length") == n);
    CHECK(cfg.at("seed") == 4);

    SUBCASE("same seed gives identical outputs") {
      REQUIRE(run("h2", {"--guidance", "hybrid"}).code == 0);
      CHECK(slurp(dir / "h" / "m0" / "s1.wav") == slurp(dir / "h2" / "m0" / "s1.wav"));
      CHECK(slurp(dir / "h" / "m0" / "trace.csv") == slurp(dir / "h2" / "m0" / "trace.csv"));
    }
    SUBCASE("analyze-guidance recomputes gamma exactly") {
      const auto a = sepdiff_run({"analyze-guidance", "--trace", (dir / "h" / "m0" / "trace.csv").string(), "--out",
                                  (dir / "an").string()});
      REQUIRE_MESSAGE(a.code == 0, a.err);
      const auto rows = read_table(dir / "an" / "m0_series.csv");
      CHECK(rows.size() == 300);
      for (const auto& row : rows) CHECK(row.at("gamma") == row.at("gamma_recomputed"));
      const auto curves = read_table(dir / "an" / "schedule_curves.csv");
      CHECK(curves.size() == 200);
      const auto summary = read_json(dir / "an" / "summary.json");
      CHECK(summary.at("traces").at(0).at("sources").size() == 2);
      CHECK(fs::exists(dir / "an" / "config.json"));
    }
    SUBCASE("eval") {
      const auto e = sepdiff_run({"eval", "--est", (dir / "h").string(), "--ref", g.mixture_dir.string(), "--out",
                                  (dir / "ev").string()});
      REQUIRE_MESSAGE(e.code == 0, e.err);
      CHECK(e.out.find("mixtures 1") != std::string::npos);
      const auto rep = read_json(dir / "ev" / "report.json");
      CHECK(rep.at("failure_rate") == 0.0);
      CHECK(rep.at("mean_si_sdr").get<double>() > 10.0);
      fs::create_directories(dir / "two" / "a");
      fs::create_directories(dir / "two" / "b");
      for (const char* s : {"a", "b"}) fs::copy_file(dir / "h" / "m0" / "s1.wav", dir / "two" / s / "s1.wav");
      CHECK(sepdiff_run({"eval", "--est", (dir / "two").string(), "--ref", g.mixture_dir.string(), "--out",
                         (dir / "ev2").string()})
                .code == cli::kExitRuntime);
    }
  }
  SUBCASE("constant schedule at zero strength never steps") {
    REQUIRE(run("c", {"--guidance", "constant", "--const", "0"}).code == 0);
    for (const auto& rec : GuidanceTrace::read_csv(dir / "c" / "m0" / "trace.csv").records) CHECK(rec.gamma == 0.0);
  }
  SUBCASE("analytic sampling") {
    const auto r = run("an", {"--guidance", "analytic", "--t-star", "200", "--init", "independent"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(GuidanceTrace::read_csv(dir / "an" / "m0" / "trace.csv").records.size() == 400);
  }
  SUBCASE("divergence keeps the partial trace") {
    const auto r = run("d", {"--guidance", "constant", "--const", "1e12"});
    CHECK(r.code == cli::kExitRuntime);
    CHECK(r.err.find("partial trace") != std::string::npos);
    const auto trace = GuidanceTrace::read_csv(dir / "d" / "m0" / "trace.csv");
    CHECK(!trace.records.empty());
    CHECK(trace.records.size() < 300);
  }
  SUBCASE("bad inputs") {
    CHECK(run("x", {"--t-star", "0"}).code == cli::kExitUsage);
    CHECK(sepdiff_run({"separate", "--mixture", (dir / "nowhere").string()}).code == cli::kExitUsage);
    CHECK(sepdiff_run({"separate", "--mixture", g.mixture_dir.string(), "--checkpoint", "a.ckpt", "--checkpoint",
                       "b.ckpt", "--out", (dir / "y").string()})
              .code == cli::kExitUsage);
  }
}

TEST_CASE("analyze-guidance input errors") {
  testing::TempDir dir("cli");
  fs::create_directories(dir / "t");
  std::ofstream(dir / "t" / "trace.csv") << "step,source,loss\n3,0,1.0\n";
  std::ofstream(dir / "t" / "config.json") << R"({"signal_length": 64})";
  CHECK(sepdiff_run({"analyze-guidance", "--trace", (dir / "t" / "trace.csv").string(), "--out", (dir / "o").string()})
            .code == cli::kExitRuntime);
  fs::remove(dir / "t" / "config.json");
  CHECK(sepdiff_run({"analyze-guidance", "--trace", (dir / "t" / "trace.csv").string(), "--out", (dir / "o").string()})
            .code == cli::kExitUsage);
  CHECK(sepdiff_run({"analyze-guidance", "--out", (dir / "o").string()}).code == cli::kExitUsage);
}
