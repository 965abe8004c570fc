// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "run_config.hpp"
#include "sepdiff/checkpoint.hpp"
#include "sepdiff/errors.hpp"
#include "sepdiff/gaussian.hpp"
#include "sepdiff/metrics.hpp"
#include "sepdiff/mixture.hpp"
#include "sepdiff/separator.hpp"
#include "sepdiff/signal.hpp"

namespace sepdiff::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Bad invocation or unusable inputs; maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

fs::path output_root(const RunConfig& c, const std::string& command) {
  if (!c.output_dir.empty()) return c.output_dir;
  const char* env = std::getenv("SEPDIFF_OUTPUT_ROOT");
  const fs::path root = env != nullptr && *env != '\0' ? fs::path(env) : fs::path("sepdiff-out");
  return root / command;
}

std::string absolute(const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); }

std::vector<fs::path> wav_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<fs::path> subdirs(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Runs fn(i) for i in [0, n) on `jobs` threads; rethrows the error of the
// lowest failing index.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------- train-prior

struct Dataset {
  std::vector<TrainingExample> examples;
  std::vector<std::string> vocab;
};

Dataset load_dataset(const fs::path& dir, std::size_t length) {
  if (dir.empty()) throw UsageError("no dataset directory given (--data)");
  if (!fs::is_directory(dir)) throw UsageError("dataset directory " + dir.string() + " does not exist");
  Dataset d;
  auto add = [&](const fs::path& f, Label label) {
    d.examples.push_back({crop_or_pad(read_wav(f).samples, length), label});
  };
  for (const auto& f : wav_files(dir)) add(f, std::nullopt);
  if (d.examples.empty()) {
    for (const auto& sub : subdirs(dir)) {
      const auto files = wav_files(sub);
      if (files.empty()) continue;
      const int label = static_cast<int>(d.vocab.size());
      d.vocab.push_back(sub.filename().string());
      for (const auto& f : files) add(f, label);
    }
  }
  if (d.examples.empty()) throw UsageError("empty dataset: no .wav files under " + dir.string());
  return d;
}

int cmd_train_prior(RunConfig cfg, std::ostream& out) {
  const fs::path root = output_root(cfg, "train-prior");
  cfg.output_dir = absolute(root.string());
  cfg.training.dataset_dir = absolute(cfg.training.dataset_dir);
  Dataset data = load_dataset(cfg.training.dataset_dir, cfg.training.signal_length);
  cfg.training.class_vocab = data.vocab;
  fs::create_directories(root);
  write_run_config(root / "config.json", cfg);

  const NoiseSchedule schedule = make_schedule(cfg);
  TrainResult r = train_denoiser(data.examples, schedule, cfg.training.train, cfg.seed, data.vocab);
  save_denoiser(root / "prior.ckpt", r.model);
  {
    std::ofstream csv(root / "train_loss.csv");
    csv << "step,loss\n";
    for (std::size_t i = 0; i < r.loss_history.size(); ++i) csv << i << "," << fmt(r.loss_history[i]) << "\n";
  }
  json summary = {{"initial_eval_loss", r.initial_eval_loss},
                  {"final_eval_loss", r.final_eval_loss},
                  {"parameter_count", r.model.parameters().size()},
                  {"examples", data.examples.size()},
                  {"class_vocab", data.vocab},
                  {"data_std", r.model.topology().data_std}};
  std::ofstream(root / "train_summary.json") << summary.dump(2) << "\n";
  out << "trained " << r.model.parameters().size() << " parameters on " << data.examples.size()
      << " examples: eval loss " << fmt(r.initial_eval_loss) << " -> " << fmt(r.final_eval_loss) << "\n"
      << "checkpoint: " << (root / "prior.ckpt").string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ synth-mix

int cmd_synth_mix(RunConfig cfg, std::ostream& out) {
  if (cfg.mixture_manifest.empty()) throw UsageError("no mixture manifest given (--manifest)");
  const fs::path manifest = absolute(cfg.mixture_manifest);
  std::ifstream in(manifest);
  if (!in) throw UsageError("cannot open manifest " + manifest.string());
  std::stringstream text;
  text << in.rdbuf();
  const auto specs = parse_mixture_manifest(text.str(), manifest.parent_path());

  const fs::path root = output_root(cfg, "synth-mix");
  cfg.output_dir = absolute(root.string());
  cfg.mixture_manifest = manifest.string();
  fs::create_directories(root / "mixtures");
  write_run_config(root / "config.json", cfg);

  std::vector<std::string> resolved(specs.size());
  parallel_for(specs.size(), cfg.jobs, [&](std::size_t i) {
    const Mixture m = make_mixture(specs[i]);
    write_mixture_dir(m, root / "mixtures");
    resolved[i] = mixture_spec_to_json(m.resolved);
  });
  json all = {{"mixtures", json::array()}};
  for (const auto& r : resolved) all["mixtures"].push_back(json::parse(r));
  std::ofstream(root / "manifest.resolved.json") << all.dump(2) << "\n";
  out << "wrote " << specs.size() << " mixtures to " << (root / "mixtures").string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- separate

struct MixtureInput {
  std::string id;
  fs::path dir;
};

std::vector<MixtureInput> find_mixtures(const fs::path& dir) {
  if (dir.empty()) throw UsageError("no mixture directory given (--mixture)");
  if (!fs::is_directory(dir)) throw UsageError("mixture directory " + dir.string() + " does not exist");
  if (fs::exists(dir / "mix.wav")) return {{dir.filename().string(), dir}};
  std::vector<MixtureInput> out;
  for (const auto& sub : subdirs(dir)) {
    if (fs::exists(sub / "mix.wav")) out.push_back({sub.filename().string(), sub});
  }
  if (out.empty()) throw UsageError("no mix.wav found under " + dir.string());
  return out;
}

Eigen::VectorXd to_vector(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd covariance_of(const json& j) {
  if (j.contains("variance")) return to_vector(j.at("variance")).asDiagonal();
  const auto rows = j.at("covariance").get<std::vector<std::vector<double>>>();
  Eigen::MatrixXd m(rows.size(), rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.size()) throw ConfigError("covariance must be square");
    for (std::size_t c = 0; c < rows.size(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

struct Priors {
  std::vector<std::shared_ptr<const ScoreModel>> models;
  std::vector<Label> labels;
};

Priors load_priors(RunConfig& cfg) {
  const NoiseSchedule schedule = make_schedule(cfg);
  Priors p;
  const auto& kind = cfg.prior.kind;
  std::vector<std::vector<std::string>> vocabs;
  if (kind == "toy-denoiser") {
    if (cfg.prior.checkpoints.size() < 2) throw UsageError("separation needs at least two prior checkpoints");
    for (auto& path : cfg.prior.checkpoints) {
      path = absolute(path);
      if (!fs::exists(path)) throw UsageError("checkpoint " + path + " does not exist");
      auto m = std::make_shared<ToyDenoiser>(load_denoiser(path, &schedule));
      vocabs.push_back(m->class_vocab());
      p.models.push_back(std::move(m));
    }
  } else if (kind == "analytic-gaussian" || kind == "analytic-gmm") {
    if (!cfg.prior.analytic.is_array() || cfg.prior.analytic.size() < 2) {
      throw UsageError("prior.analytic must list at least two sources");
    }
    try {
      for (const auto& src : cfg.prior.analytic) {
        if (kind == "analytic-gaussian") {
          p.models.push_back(std::make_shared<GaussianPrior>(to_vector(src.at("mean")), covariance_of(src), schedule));
        } else {
          std::vector<GmmPrior::Component> comps;
          for (const auto& c : src.at("components")) {
            comps.push_back({c.value("weight", 1.0), to_vector(c.at("mean")), covariance_of(c)});
          }
          p.models.push_back(std::make_shared<GmmPrior>(std::move(comps), schedule));
        }
        vocabs.emplace_back();
      }
    } catch (const json::exception& e) {
      throw ConfigError(std::string("invalid analytic prior parameters: ") + e.what());
    }
  } else {
    throw ConfigError("unknown prior kind '" + kind + "'");
  }
  if (!cfg.prior.labels.empty()) {
    if (cfg.prior.labels.size() != p.models.size()) throw ConfigError("prior.labels needs one entry per source");
    for (std::size_t k = 0; k < p.models.size(); ++k) {
      const auto& name = cfg.prior.labels[k];
      if (!name) {
        p.labels.emplace_back();
        continue;
      }
      const auto& v = vocabs[k];
      const auto it = std::find(v.begin(), v.end(), *name);
      if (it == v.end()) throw LabelError("label '" + *name + "' is not in the vocabulary of prior " + std::to_string(k + 1));
      p.labels.emplace_back(static_cast<int>(it - v.begin()));
    }
  }
  return p;
}

int cmd_separate(RunConfig cfg, std::ostream& out, std::ostream& err) {
  cfg.mixture_dir = absolute(cfg.mixture_dir);
  const auto mixtures = find_mixtures(cfg.mixture_dir);
  const Priors priors = load_priors(cfg);
  const fs::path root = output_root(cfg, "separate");
  cfg.output_dir = absolute(root.string());
  fs::create_directories(root);
  write_run_config(root / "config.json", cfg);
  const std::size_t K = priors.models.size();

  std::mutex io;
  std::vector<int> status(mixtures.size(), kExitOk);
  parallel_for(mixtures.size(), cfg.jobs, [&](std::size_t i) {
    const auto& mx = mixtures[i];
    SeparationProblem p;
    p.y = read_wav(mx.dir / "mix.wav").samples;
    p.models = priors.models;
    p.labels = priors.labels;
    p.guidance = cfg.guidance.schedule;
    p.loss = cfg.guidance.loss;
    p.mode = cfg.guidance.mode;
    p.init = cfg.init;
    p.seed = cfg.seed + i;
    bool have_refs = true;
    for (std::size_t k = 0; k < K; ++k) have_refs = have_refs && fs::exists(mx.dir / ("s" + std::to_string(k + 1) + ".wav"));
    if (have_refs) {
      for (std::size_t k = 0; k < K; ++k) {
        auto r = read_wav(mx.dir / ("s" + std::to_string(k + 1) + ".wav")).samples;
        if (r.size() != p.y.size()) {
          have_refs = false;
          break;
        }
        p.refs.push_back(std::move(r));
      }
      if (!have_refs) p.refs.clear();
    }
    const fs::path dir = root / mx.id;
    fs::create_directories(dir);
    json run = to_json(cfg);
    run["mixture_dir"] = mx.dir.string();
    run["seed"] = p.seed;
    run["signal_length"] = p.y.size();
    run["mixture_id"] = mx.id;
    std::ofstream(dir / "config.json") << run.dump(2) << "\n";
    try {
      const SeparationResult r = cfg.guidance.analytic ? separate_analytic(p) : separate(p);
      r.trace.write_csv(dir / "trace.csv");
      for (std::size_t k = 0; k < K; ++k) {
        write_wav(dir / ("s" + std::to_string(k + 1) + ".wav"), Waveform{r.sources[k], kDefaultRate});
      }
      if (!p.refs.empty()) {
        const EvalEntry e = evaluate(r.sources, p.refs);
        std::lock_guard<std::mutex> lock(io);
        out << mx.id << ": mean SI-SDR " << fmt(e.mean) << " dB\n";
      } else {
        std::lock_guard<std::mutex> lock(io);
        out << mx.id << ": separated into " << K << " sources\n";
      }
    } catch (const DivergenceError& e) {
      e.trace().write_csv(dir / "trace.csv");
      std::lock_guard<std::mutex> lock(io);
      err << "sepdiff: " << mx.id << ": " << e.what() << "; partial trace in " << (dir / "trace.csv").string() << "\n";
      status[i] = kExitRuntime;
    }
  });
  return *std::max_element(status.begin(), status.end());
}

// ----------------------------------------------------------- analyze-guidance

double median(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

int cmd_analyze(RunConfig cfg, const std::vector<std::string>& traces, const std::string& config_path,
                std::ostream& out) {
  if (traces.empty()) throw UsageError("no trace files given (--trace)");
  const fs::path root = output_root(cfg, "analyze-guidance");
  cfg.output_dir = absolute(root.string());
  fs::create_directories(root);

  json summary = {{"traces", json::array()}};
  std::optional<RunConfig> first_cfg;
  for (const auto& tpath : traces) {
    const fs::path trace_path = absolute(tpath);
    if (!fs::exists(trace_path)) throw UsageError("trace " + trace_path.string() + " does not exist");
    fs::path cpath = config_path.empty() ? trace_path.parent_path() / "config.json" : fs::path(config_path);
    if (!fs::exists(cpath)) throw UsageError("no config.json next to " + trace_path.string() + " (use --config)");
    std::ifstream cin(cpath);
    json raw;
    try {
      raw = json::parse(cin);
    } catch (const json::exception& e) {
      throw ConfigError("config " + cpath.string() + ": " + e.what());
    }
    const RunConfig tc = run_config_from_json(raw);
    if (!first_cfg) first_cfg = tc;
    if (!raw.contains("signal_length")) throw SchemaError("config " + cpath.string() + " lacks signal_length");
    const auto N = raw.at("signal_length").get<std::size_t>();
    const NoiseSchedule noise = make_schedule(tc);
    const GuidanceTrace trace = GuidanceTrace::read_csv(trace_path);
    const bool active = tc.guidance.analytic || tc.guidance.loss.enabled();

    const std::string name = raw.value("mixture_id", trace_path.parent_path().filename().string());
    std::ofstream csv(root / (name + "_series.csv"));
    csv << "step,source,gamma,gamma_recomputed,grad_rms,guidance_bound,x0_energy,si_sdr\n";
    std::map<int, std::vector<const TraceRecord*>> by_source;
    for (const auto& r : trace.records) {
      if (r.step < 0 || r.step >= noise.steps()) throw SchemaError("trace step outside the schedule");
      const double g = active ? gamma(tc.guidance.schedule, r.step, r.grad_norm, N, noise).value_or(0.0) : 0.0;
      csv << r.step << "," << r.source << "," << fmt(r.gamma) << "," << fmt(g) << ","
          << fmt(r.gamma * r.grad_norm / std::sqrt(static_cast<double>(N))) << "," << fmt(r.guidance_bound) << ","
          << fmt(r.x0_energy) << "," << (r.si_sdr ? fmt(*r.si_sdr) : std::string()) << "\n";
      by_source[r.source].push_back(&r);
    }
    json entry = {{"trace", trace_path.string()}, {"id", name}, {"sources", json::array()}};
    for (auto& [k, recs] : by_source) {
      // Records run from high step to low; the "first" quartile is the earliest (noisiest) part of the run.
      const std::size_t q = std::max<std::size_t>(1, recs.size() / 4);
      std::vector<double> early, late;
      std::size_t positive = 0;
      for (std::size_t i = 0; i < q; ++i) {
        early.push_back(recs[i]->guidance_bound);
        positive += recs[i]->guidance_bound > 0.0 ? 1 : 0;
        late.push_back(recs[recs.size() - 1 - i]->guidance_bound);
      }
      json s = {{"source", k},
                {"first_quartile_median_bound", jnum(median(early))},
                {"last_quartile_median_bound", jnum(median(late))},
                {"early_positive_fraction", static_cast<double>(positive) / static_cast<double>(q)}};
      if (recs.back()->si_sdr) s["final_si_sdr"] = jnum(*recs.back()->si_sdr);
      entry["sources"].push_back(s);
    }
    summary["traces"].push_back(entry);
  }

  // Schedule curves without gradient normalization.
  const RunConfig& sc = *first_cfg;
  const NoiseSchedule noise = make_schedule(sc);
  std::ofstream curves(root / "schedule_curves.csv");
  curves << "step,sigma,constant,dsg,hybrid\n";
  for (int i = 0; i < noise.steps(); ++i) {
    const double s = noise.sigma(i);
    curves << i << "," << fmt(s) << "," << fmt(sc.guidance.schedule.const_value) << "," << fmt(s) << ","
           << fmt(smooth_max(s, sc.guidance.schedule.s_floor, sc.guidance.schedule.c)) << "\n";
  }
  std::ofstream(root / "summary.json") << summary.dump(2) << "\n";
  RunConfig written = sc;
  written.output_dir = cfg.output_dir;
  write_run_config(root / "config.json", written);
  out << "analyzed " << traces.size() << " trace(s) into " << root.string() << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------------- eval

std::map<std::string, fs::path> source_sets(const fs::path& dir) {
  if (dir.empty() || !fs::is_directory(dir)) throw UsageError("directory " + dir.string() + " does not exist");
  std::map<std::string, fs::path> out;
  if (fs::exists(dir / "s1.wav")) {
    out[dir.filename().string()] = dir;
    return out;
  }
  for (const auto& sub : subdirs(dir)) {
    if (fs::exists(sub / "s1.wav")) out[sub.filename().string()] = sub;
  }
  return out;
}

std::vector<std::vector<double>> read_sources(const fs::path& dir) {
  std::vector<std::vector<double>> out;
  for (int k = 1; fs::exists(dir / ("s" + std::to_string(k) + ".wav")); ++k) {
    out.push_back(read_wav(dir / ("s" + std::to_string(k) + ".wav")).samples);
  }
  return out;
}

int cmd_eval(RunConfig cfg, std::ostream& out) {
  cfg.est_dir = absolute(cfg.est_dir);
  cfg.ref_dir = absolute(cfg.ref_dir);
  const auto ests = source_sets(cfg.est_dir);
  const auto refs = source_sets(cfg.ref_dir);
  if (ests.empty()) throw SchemaError("no estimates (s1.wav ...) under " + cfg.est_dir);
  if (ests.size() != refs.size()) {
    throw SchemaError("estimate and reference directories hold " + std::to_string(ests.size()) + " vs " +
                      std::to_string(refs.size()) + " mixtures");
  }
  std::vector<std::pair<std::string, std::pair<fs::path, fs::path>>> pairs;
  if (ests.size() == 1) {
    pairs.push_back({ests.begin()->first, {ests.begin()->second, refs.begin()->second}});
  } else {
    for (const auto& [id, path] : ests) {
      const auto it = refs.find(id);
      if (it == refs.end()) throw SchemaError("no reference set for mixture '" + id + "'");
      pairs.push_back({id, {path, it->second}});
    }
  }
  std::vector<EvalEntry> entries(pairs.size());
  parallel_for(pairs.size(), cfg.jobs, [&](std::size_t i) {
    const auto e = read_sources(pairs[i].second.first);
    const auto r = read_sources(pairs[i].second.second);
    if (e.size() != r.size()) {
      throw SchemaError("mixture '" + pairs[i].first + "': " + std::to_string(e.size()) + " estimates vs " +
                        std::to_string(r.size()) + " references");
    }
    entries[i] = evaluate(e, r);
    entries[i].id = pairs[i].first;
  });
  const EvalReport rep = EvalReport::aggregate(std::move(entries));
  const fs::path root = output_root(cfg, "eval");
  cfg.output_dir = absolute(root.string());
  fs::create_directories(root);
  write_run_config(root / "config.json", cfg);
  std::ofstream(root / "report.json") << rep.to_json();
  std::ofstream(root / "report.csv") << rep.to_csv();
  out << "mixtures " << rep.entries.size() << "  mean SI-SDR " << fmt(rep.mean_si_sdr) << " dB  failure rate "
      << fmt(rep.failure_rate) << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Diffusion-prior source separation toolkit"};
  app.name("sepdiff");
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Run configuration JSON");
    sub->add_option("--out", out_dir, "Output directory (default $SEPDIFF_OUTPUT_ROOT/<command>)");
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--jobs", jobs, "Parallel workers over mixtures")->check(CLI::PositiveNumber);
  };

  auto* train = app.add_subcommand("train-prior", "Train a toy denoiser prior on a WAV dataset");
  common(train);
  std::string data_dir;
  std::optional<int> steps, batch, channels;
  std::optional<std::size_t> signal_length, crop;
  train->add_option("--data", data_dir, "Dataset directory (WAV files, or one subdirectory per class)");
  train->add_option("--steps", steps, "Optimizer steps");
  train->add_option("--batch", batch, "Batch size");
  train->add_option("--crop", crop, "Random crop length (0 = full signal)");
  train->add_option("--channels", channels, "Denoiser width");
  train->add_option("--signal-length", signal_length, "Crop/pad every training signal to this length");

  auto* synth = app.add_subcommand("synth-mix", "Synthesize mixtures from a JSON manifest");
  common(synth);
  std::string manifest;
  synth->add_option("--manifest", manifest, "Mixture manifest JSON");

  auto* sep = app.add_subcommand("separate", "Separate mixtures with diffusion priors");
  common(sep);
  std::string mixture_dir, guidance, init_mode, mode;
  std::optional<double> const_value;
  std::optional<int> t_star;
  std::vector<std::string> checkpoints;
  sep->add_option("--mixture", mixture_dir, "Mixture directory (containing mix.wav) or a directory of them");
  sep->add_option("--guidance", guidance, "Guidance schedule")
      ->check(CLI::IsMember({"constant", "dsg", "hybrid", "analytic"}));
  sep->add_option("--const", const_value, "Strength of the constant schedule");
  sep->add_option("--t-star", t_star, "Initialization noise level t* (1..T)");
  sep->add_option("--init", init_mode, "Initialization mode")->check(CLI::IsMember({"unified", "independent"}));
  sep->add_option("--mode", mode, "Gradient mode")
      ->check(CLI::IsMember({"exact-jvp", "backprop", "identity-jacobian", "finite-difference"}));
  sep->add_option("--checkpoint", checkpoints, "Prior checkpoint, one per source (repeatable)");

  auto* analyze = app.add_subcommand("analyze-guidance", "Emit figure data from guidance traces");
  common(analyze);
  std::vector<std::string> traces;
  analyze->add_option("--trace", traces, "trace.csv file (repeatable)");

  auto* ev = app.add_subcommand("eval", "SI-SDR evaluation of separated sources");
  common(ev);
  std::string est_dir, ref_dir;
  ev->add_option("--est", est_dir, "Estimates: <id>/s1.wav ... or a single set");
  ev->add_option("--ref", ref_dir, "References with the same layout");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg;
    const bool analyzing = analyze->parsed();
    if (!config_path.empty() && !analyzing) cfg = load_run_config(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed) cfg.seed = *seed;
    if (jobs) cfg.jobs = *jobs;

    if (train->parsed()) {
      if (!data_dir.empty()) cfg.training.dataset_dir = data_dir;
      if (steps) cfg.training.train.steps = *steps;
      if (batch) cfg.training.train.batch = *batch;
      if (crop) cfg.training.train.crop = *crop;
      if (channels) cfg.training.train.topology.channels = *channels;
      if (signal_length) cfg.training.signal_length = *signal_length;
      return cmd_train_prior(cfg, out);
    }
    if (synth->parsed()) {
      if (!manifest.empty()) cfg.mixture_manifest = manifest;
      return cmd_synth_mix(cfg, out);
    }
    if (sep->parsed()) {
      if (!mixture_dir.empty()) cfg.mixture_dir = mixture_dir;
      if (!checkpoints.empty()) {
        cfg.prior.kind = "toy-denoiser";
        cfg.prior.checkpoints = checkpoints;
      }
      if (guidance == "analytic") {
        cfg.guidance.analytic = true;
      } else if (!guidance.empty()) {
        cfg.guidance.analytic = false;
        cfg.guidance.schedule.kind = guidance_kind_from_string(guidance);
      }
      if (const_value) cfg.guidance.schedule.const_value = *const_value;
      if (t_star) cfg.init.t_star = *t_star;
      if (!init_mode.empty()) cfg.init.mode = init_mode_from_string(init_mode);
      if (!mode.empty()) cfg.guidance.mode = gradient_mode_from_string(mode);
      return cmd_separate(cfg, out, err);
    }
    if (analyzing) return cmd_analyze(cfg, traces, config_path, out);
    if (!est_dir.empty()) cfg.est_dir = est_dir;
    if (!ref_dir.empty()) cfg.ref_dir = ref_dir;
    return cmd_eval(cfg, out);
  } catch (const UsageError& e) {
    err << "sepdiff: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "sepdiff: configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "sepdiff: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace sepdiff::cli
