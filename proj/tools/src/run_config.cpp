// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "run_config.hpp"

#include <fstream>
#include <set>

#include "sepdiff/errors.hpp"

namespace sepdiff::cli {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json to_json(const RunConfig& c) {
  json labels = json::array();
  for (const auto& l : c.prior.labels) labels.push_back(l ? json(*l) : json(nullptr));
  const auto& t = c.training.train;
  const auto& g = c.guidance;
  return {
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"jobs", c.jobs},
      {"schedule", {{"steps", c.schedule.steps}, {"beta_min", c.schedule.beta_min}, {"beta_max", c.schedule.beta_max}}},
      {"prior",
       {{"kind", c.prior.kind}, {"checkpoints", c.prior.checkpoints}, {"labels", labels}, {"analytic", c.prior.analytic}}},
      {"training",
       {{"dataset_dir", c.training.dataset_dir},
        {"signal_length", c.training.signal_length},
        {"steps", t.steps},
        {"batch", t.batch},
        {"crop", t.crop},
        {"lr", t.lr},
        {"grad_clip", t.grad_clip},
        {"eval_batch", t.eval_batch},
        {"channels", t.topology.channels},
        {"kernel", t.topology.kernel},
        {"embed_dim", t.topology.embed_dim},
        {"class_vocab", c.training.class_vocab}}},
      {"guidance",
       {{"kind", to_string(g.schedule.kind)},
        {"const_value", g.schedule.const_value},
        {"s_floor", g.schedule.s_floor},
        {"c", g.schedule.c},
        {"joint_norm", g.schedule.joint_norm},
        {"mode", to_string(g.mode)},
        {"analytic", g.analytic},
        {"lambda_time", g.loss.lambda_time},
        {"lambda_group", g.loss.lambda_group},
        {"lambda_stft", g.loss.lambda_stft},
        {"group_count", g.loss.group_count},
        {"stft_window", g.loss.stft.window_len},
        {"stft_hop", g.loss.stft.hop}}},
      {"init", {{"mode", to_string(c.init.mode)}, {"t_star", c.init.t_star}}},
      {"mixture_manifest", c.mixture_manifest},
      {"mixture_dir", c.mixture_dir},
      {"est_dir", c.est_dir},
      {"ref_dir", c.ref_dir},
  };
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  try {
    check_keys(j,
               {"seed", "output_dir", "jobs", "schedule", "prior", "training", "guidance", "init", "mixture_manifest",
                "mixture_dir", "est_dir", "ref_dir", "signal_length", "mixture_id"},
               "config");
    read(j, "seed", c.seed);
    read(j, "output_dir", c.output_dir);
    read(j, "jobs", c.jobs);
    read(j, "mixture_manifest", c.mixture_manifest);
    read(j, "mixture_dir", c.mixture_dir);
    read(j, "est_dir", c.est_dir);
    read(j, "ref_dir", c.ref_dir);
    if (j.contains("schedule")) {
      const auto& s = j.at("schedule");
      check_keys(s, {"steps", "beta_min", "beta_max"}, "schedule");
      read(s, "steps", c.schedule.steps);
      read(s, "beta_min", c.schedule.beta_min);
      read(s, "beta_max", c.schedule.beta_max);
    }
    if (j.contains("prior")) {
      const auto& p = j.at("prior");
      check_keys(p, {"kind", "checkpoints", "labels", "analytic"}, "prior");
      read(p, "kind", c.prior.kind);
      read(p, "checkpoints", c.prior.checkpoints);
      if (p.contains("labels")) {
        for (const auto& l : p.at("labels")) {
          c.prior.labels.push_back(l.is_null() ? std::nullopt : std::optional<std::string>(l.get<std::string>()));
        }
      }
      if (p.contains("analytic")) c.prior.analytic = p.at("analytic");
    }
    if (j.contains("training")) {
      const auto& t = j.at("training");
      check_keys(t,
                 {"dataset_dir", "signal_length", "steps", "batch", "crop", "lr", "grad_clip", "eval_batch", "channels",
                  "kernel", "embed_dim", "class_vocab"},
                 "training");
      auto& tc = c.training.train;
      read(t, "dataset_dir", c.training.dataset_dir);
      read(t, "signal_length", c.training.signal_length);
      read(t, "steps", tc.steps);
      read(t, "batch", tc.batch);
      read(t, "crop", tc.crop);
      read(t, "lr", tc.lr);
      read(t, "grad_clip", tc.grad_clip);
      read(t, "eval_batch", tc.eval_batch);
      read(t, "channels", tc.topology.channels);
      read(t, "kernel", tc.topology.kernel);
      read(t, "embed_dim", tc.topology.embed_dim);
      read(t, "class_vocab", c.training.class_vocab);
    }
    if (j.contains("guidance")) {
      const auto& g = j.at("guidance");
      check_keys(g,
                 {"kind", "const_value", "s_floor", "c", "joint_norm", "mode", "analytic", "lambda_time",
                  "lambda_group", "lambda_stft", "group_count", "stft_window", "stft_hop"},
                 "guidance");
      auto& gc = c.guidance;
      if (g.contains("kind")) gc.schedule.kind = guidance_kind_from_string(g.at("kind").get<std::string>());
      if (g.contains("mode")) gc.mode = gradient_mode_from_string(g.at("mode").get<std::string>());
      read(g, "const_value", gc.schedule.const_value);
      read(g, "s_floor", gc.schedule.s_floor);
      read(g, "c", gc.schedule.c);
      read(g, "joint_norm", gc.schedule.joint_norm);
      read(g, "analytic", gc.analytic);
      read(g, "lambda_time", gc.loss.lambda_time);
      read(g, "lambda_group", gc.loss.lambda_group);
      read(g, "lambda_stft", gc.loss.lambda_stft);
      read(g, "group_count", gc.loss.group_count);
      read(g, "stft_window", gc.loss.stft.window_len);
      read(g, "stft_hop", gc.loss.stft.hop);
    }
    if (j.contains("init")) {
      const auto& i = j.at("init");
      check_keys(i, {"mode", "t_star"}, "init");
      if (i.contains("mode")) c.init.mode = init_mode_from_string(i.at("mode").get<std::string>());
      read(i, "t_star", c.init.t_star);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid run config: ") + e.what());
  }
  if (c.jobs < 1) throw ConfigError("jobs must be >= 1");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

void write_run_config(const std::filesystem::path& path, const RunConfig& c) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path.string());
  out << to_json(c).dump(2) << "\n";
}

NoiseSchedule make_schedule(const RunConfig& c) {
  return NoiseSchedule::linear(c.schedule.steps, c.schedule.beta_min, c.schedule.beta_max);
}

}  // namespace sepdiff::cli
