// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepdiff/mixture.hpp"

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "sepdiff/errors.hpp"
#include "sepdiff/fft.hpp"

namespace sepdiff {

using nlohmann::json;

std::string to_string(SynthRecipe::Kind kind) {
  switch (kind) {
    case SynthRecipe::Kind::kTone: return "tone";
    case SynthRecipe::Kind::kNoiseBurst: return "noise_burst";
    case SynthRecipe::Kind::kChirp: return "chirp";
  }
  return "tone";
}

SynthRecipe::Kind synth_kind_from_string(const std::string& name) {
  if (name == "tone") return SynthRecipe::Kind::kTone;
  if (name == "noise_burst") return SynthRecipe::Kind::kNoiseBurst;
  if (name == "chirp") return SynthRecipe::Kind::kChirp;
  throw ConfigError("unknown synth kind '" + name + "'");
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> harmonic_tone(const SynthRecipe& r, std::size_t n, int rate, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> f0_dist(r.f0_min, r.f0_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double f0 = f0_dist(rng);
  std::vector<double> out(n, 0.0);
  for (int k = 1; k * f0 < std::min(r.max_freq, 0.5 * rate); ++k) {
    const double amp = std::pow(static_cast<double>(k), -r.rolloff) * (0.5 + 0.5 * unit(rng));
    const double phase = kTwoPi * unit(rng);
    const double w = kTwoPi * k * f0 / rate;
    for (std::size_t i = 0; i < n; ++i) out[i] += amp * std::sin(w * static_cast<double>(i) + phase);
  }
  return out;
}

std::vector<double> noise_burst(const SynthRecipe& r, std::size_t n, int rate, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> noise(n);
  for (auto& v : noise) v = gauss(rng);

  std::vector<std::complex<double>> spec(n / 2 + 1);
  fft::rfft(noise, spec);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = static_cast<double>(k) * rate / static_cast<double>(n);
    if (f < r.band_lo || f > r.band_hi) spec[k] = 0.0;
  }
  std::vector<double> band(n);
  fft::irfft_unnormalized(spec, band);

  const double frac = r.burst_min + (r.burst_max - r.burst_min) * unit(rng);
  const auto dur = static_cast<std::size_t>(frac * static_cast<double>(n));
  const auto start = static_cast<std::size_t>(unit(rng) * static_cast<double>(n - dur));
  const std::size_t ramp = std::max<std::size_t>(1, std::min<std::size_t>(dur / 4, rate / 100));
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < dur; ++i) {
    double g = 1.0;
    if (i < ramp) g = 0.5 - 0.5 * std::cos(std::numbers::pi * i / ramp);
    if (dur - 1 - i < ramp) g = std::min(g, 0.5 - 0.5 * std::cos(std::numbers::pi * (dur - 1 - i) / ramp));
    out[start + i] = g * band[start + i];
  }
  return out;
}

std::vector<double> chirp(const SynthRecipe& r, std::size_t n, int rate, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double phase0 = kTwoPi * unit(rng);
  const double dur = static_cast<double>(n) / rate;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    out[i] = std::sin(phase0 + kTwoPi * (r.f_start * t + 0.5 * (r.f_end - r.f_start) * t * t / dur));
  }
  return out;
}

json recipe_to_json(const SynthRecipe& r) {
  json j{{"kind", to_string(r.kind)}};
  switch (r.kind) {
    case SynthRecipe::Kind::kTone:
      j["f0_min"] = r.f0_min;
      j["f0_max"] = r.f0_max;
      j["max_freq"] = r.max_freq;
      j["rolloff"] = r.rolloff;
      break;
    case SynthRecipe::Kind::kNoiseBurst:
      j["band_lo"] = r.band_lo;
      j["band_hi"] = r.band_hi;
      j["burst_min"] = r.burst_min;
      j["burst_max"] = r.burst_max;
      break;
    case SynthRecipe::Kind::kChirp:
      j["f_start"] = r.f_start;
      j["f_end"] = r.f_end;
      break;
  }
  return j;
}

SynthRecipe recipe_from_json(const json& j) {
  SynthRecipe r;
  r.kind = synth_kind_from_string(j.at("kind").get<std::string>());
  r.f0_min = j.value("f0_min", r.f0_min);
  r.f0_max = j.value("f0_max", r.f0_max);
  r.max_freq = j.value("max_freq", r.max_freq);
  r.rolloff = j.value("rolloff", r.rolloff);
  r.band_lo = j.value("band_lo", r.band_lo);
  r.band_hi = j.value("band_hi", r.band_hi);
  r.burst_min = j.value("burst_min", r.burst_min);
  r.burst_max = j.value("burst_max", r.burst_max);
  r.f_start = j.value("f_start", r.f_start);
  r.f_end = j.value("f_end", r.f_end);
  return r;
}

json spec_to_json(const MixtureSpec& s) {
  json sources = json::array();
  for (const auto& src : s.sources) {
    json j = json::object();
    if (src.file) j["file"] = src.file->string();
    if (src.synth) j["synth"] = recipe_to_json(*src.synth);
    if (src.rms_db) j["rms_db"] = *src.rms_db;
    if (src.offset) j["offset"] = *src.offset;
    if (src.label) j["label"] = *src.label;
    sources.push_back(std::move(j));
  }
  return json{{"id", s.id},
              {"seed", s.seed},
              {"rate", s.rate},
              {"length", s.length},
              {"rms_db_range", {s.rms_db_min, s.rms_db_max}},
              {"max_offset", s.max_offset},
              {"sources", std::move(sources)}};
}

MixtureSpec spec_from_json(const json& j, const std::filesystem::path& base_dir) {
  MixtureSpec s;
  s.id = j.value("id", s.id);
  s.seed = j.value("seed", s.seed);
  s.rate = j.value("rate", s.rate);
  s.length = j.value("length", s.length);
  if (j.contains("rms_db_range")) {
    s.rms_db_min = j.at("rms_db_range").at(0).get<double>();
    s.rms_db_max = j.at("rms_db_range").at(1).get<double>();
  }
  s.max_offset = j.value("max_offset", s.max_offset);
  if (!j.contains("sources") || !j.at("sources").is_array() || j.at("sources").empty()) {
    throw ConfigError("mixture '" + s.id + "' has no sources");
  }
  for (const auto& sj : j.at("sources")) {
    SourceSpec src;
    if (sj.contains("file")) {
      std::filesystem::path p = sj.at("file").get<std::string>();
      src.file = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
    if (sj.contains("synth")) src.synth = recipe_from_json(sj.at("synth"));
    if (!src.file && !src.synth) throw ConfigError("source needs either 'file' or 'synth'");
    if (sj.contains("rms_db")) src.rms_db = sj.at("rms_db").get<double>();
    if (sj.contains("offset")) src.offset = sj.at("offset").get<std::size_t>();
    if (sj.contains("label")) src.label = sj.at("label").get<std::string>();
    s.sources.push_back(std::move(src));
  }
  if (s.rms_db_min > s.rms_db_max) throw ConfigError("rms_db_range is reversed");
  if (s.length == 0) throw ConfigError("mixture length must be positive");
  return s;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  // splitmix64 step
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::vector<double> synthesize(const SynthRecipe& recipe, std::size_t length, int rate, std::mt19937_64& rng) {
  if (length == 0) throw ConfigError("synthesize: zero length");
  switch (recipe.kind) {
    case SynthRecipe::Kind::kTone: return harmonic_tone(recipe, length, rate, rng);
    case SynthRecipe::Kind::kNoiseBurst: return noise_burst(recipe, length, rate, rng);
    case SynthRecipe::Kind::kChirp: return chirp(recipe, length, rate, rng);
  }
  throw ConfigError("unknown synth kind");
}

Mixture make_mixture(const MixtureSpec& spec) {
  if (spec.sources.empty()) throw ConfigError("mixture '" + spec.id + "' has no sources");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> db_dist(spec.rms_db_min, spec.rms_db_max);

  Mixture m;
  m.id = spec.id;
  m.resolved = spec;
  m.mix.rate = spec.rate;
  m.mix.samples.assign(spec.length, 0.0);

  for (std::size_t k = 0; k < spec.sources.size(); ++k) {
    auto& src = m.resolved.sources[k];
    // Draw every random quantity in a fixed order so resolved specs replay.
    const double db = src.rms_db ? *src.rms_db : db_dist(rng);
    const std::size_t offset =
        src.offset ? *src.offset
                   : std::uniform_int_distribution<std::size_t>(0, spec.max_offset)(rng);
    std::vector<double> raw;
    if (src.file) {
      try {
        raw = read_wav(*src.file, spec.rate).samples;
      } catch (const IngestionError& e) {
        throw IngestionError("source " + std::to_string(k + 1) + " of '" + spec.id + "': " + e.what(),
                             e.offset());
      }
    } else {
      std::mt19937_64 src_rng(derive_seed(spec.seed, k));
      raw = synthesize(*src.synth, spec.length, spec.rate, src_rng);
    }
    auto shaped = delay(crop_or_pad(raw, spec.length), std::min(offset, spec.length));
    std::vector<double> ref;
    try {
      ref = scale_to_rms_db(shaped, db);
    } catch (const IngestionError&) {
      throw IngestionError("source " + std::to_string(k + 1) + " of '" + spec.id +
                           "' is silent; RMS scaling undefined");
    }
    src.rms_db = db;
    src.offset = offset;
    for (std::size_t i = 0; i < spec.length; ++i) m.mix.samples[i] += ref[i];
    m.refs.push_back(Waveform{std::move(ref), spec.rate});
  }
  return m;
}

std::vector<MixtureSpec> parse_mixture_manifest(const std::string& json_text,
                                                const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("mixture manifest is not valid JSON: ") + e.what());
  }
  std::vector<MixtureSpec> out;
  try {
    if (j.contains("mixtures")) {
      for (const auto& mj : j.at("mixtures")) out.push_back(spec_from_json(mj, base_dir));
      return out;
    }
    const MixtureSpec base = spec_from_json(j, base_dir);
    const std::size_t count = j.value("count", std::size_t{1});
    if (count <= 1 && !j.contains("count")) {
      out.push_back(base);
      return out;
    }
    for (std::size_t i = 0; i < count; ++i) {
      MixtureSpec s = base;
      char id[32];
      std::snprintf(id, sizeof(id), "mix%04zu", i);
      s.id = id;
      s.seed = derive_seed(base.seed, 1000003 + i);
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid mixture manifest: ") + e.what());
  }
  return out;
}

std::string mixture_spec_to_json(const MixtureSpec& spec) { return spec_to_json(spec).dump(2); }

std::filesystem::path write_mixture_dir(const Mixture& mixture, const std::filesystem::path& root) {
  const auto dir = root / mixture.id;
  std::filesystem::create_directories(dir);
  write_wav(dir / "mix.wav", mixture.mix);
  for (std::size_t k = 0; k < mixture.refs.size(); ++k) {
    write_wav(dir / ("s" + std::to_string(k + 1) + ".wav"), mixture.refs[k]);
  }
  std::ofstream(dir / "spec.json") << mixture_spec_to_json(mixture.resolved) << "\n";
  return dir;
}

}  // namespace sepdiff
