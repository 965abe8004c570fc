// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sepdiff/signal.hpp"

namespace sepdiff {

/// Parametric synthetic source family. Per-instance parameters (f0, phases,
/// burst position, ...) are drawn from the generator passed to synthesize().
struct SynthRecipe {
  enum class Kind { kTone, kNoiseBurst, kChirp };
  Kind kind = Kind::kTone;

  // kTone: harmonic series with f0 ~ U[f0_min, f0_max], partials below
  // max_freq, amplitude k^-rolloff with random jitter and phase.
  double f0_min = 100.0;
  double f0_max = 300.0;
  double max_freq = 1500.0;
  double rolloff = 1.0;

  // kNoiseBurst: Gaussian noise band-limited to [band_lo, band_hi] Hz, gated
  // by a raised-cosine envelope covering burst_min..burst_max of the length.
  double band_lo = 4000.0;
  double band_hi = 7000.0;
  double burst_min = 0.4;
  double burst_max = 0.8;

  // kChirp: linear sweep between the two frequencies.
  double f_start = 500.0;
  double f_end = 2000.0;
};

std::string to_string(SynthRecipe::Kind kind);
SynthRecipe::Kind synth_kind_from_string(const std::string& name);

std::vector<double> synthesize(const SynthRecipe& recipe, std::size_t length, int rate, std::mt19937_64& rng);

struct SourceSpec {
  std::optional<std::filesystem::path> file;
  std::optional<SynthRecipe> synth;
  std::optional<double> rms_db;        ///< drawn from the spec range when absent
  std::optional<std::size_t> offset;   ///< drawn from [0, max_offset] when absent
  std::optional<std::string> label;    ///< class label passed to conditional priors
};

struct MixtureSpec {
  std::string id = "mix0000";
  std::uint64_t seed = 0;
  int rate = kDefaultRate;
  std::size_t length = 4 * kDefaultRate;
  double rms_db_min = -25.0;
  double rms_db_max = -20.0;
  std::size_t max_offset = 0;
  std::vector<SourceSpec> sources;
};

struct Mixture {
  std::string id;
  Waveform mix;
  std::vector<Waveform> refs;
  MixtureSpec resolved;  ///< every random choice made concrete
};

/// Loads or synthesizes each source, crops/pads to the spec length, delays
/// it by its offset and scales it to its RMS target; the mixture is the
/// plain sum of the resulting references.
Mixture make_mixture(const MixtureSpec& spec);

/// Parses a JSON manifest. A manifest is either a single mixture object, an
/// object with a "mixtures" array, or a template with "count" > 1 that is
/// expanded into mixtures mix0000.. with per-mixture seeds derived from
/// "seed". Relative file paths resolve against `base_dir`.
std::vector<MixtureSpec> parse_mixture_manifest(const std::string& json_text,
                                                const std::filesystem::path& base_dir = {});

std::string mixture_spec_to_json(const MixtureSpec& spec);

/// Writes <root>/<id>/mix.wav, s1.wav.. sK.wav and spec.json (resolved).
std::filesystem::path write_mixture_dir(const Mixture& mixture, const std::filesystem::path& root);

}  // namespace sepdiff
