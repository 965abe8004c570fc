// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepdiff/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sepdiff/errors.hpp"

namespace sepdiff {

namespace {

constexpr char kMagic[4] = {'S', 'D', 'C', 'K'};

template <typename T>
void put(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get(std::istream& in, std::size_t& offset, const std::string& what) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IngestionError("truncated checkpoint " + what, offset);
  offset += sizeof(T);
  return v;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << v;
  return s.str();
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json header = ckpt.header_json.empty() ? nlohmann::json::object() : nlohmann::json::parse(ckpt.header_json);
  header["format"] = "sepdiff-checkpoint-1";
  header["param_count"] = ckpt.params.size();
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot open " + path.string() + " for writing");
  out.write(kMagic, 4);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put<std::uint64_t>(out, ckpt.params.size());
  out.write(reinterpret_cast<const char*>(ckpt.params.data()),
            static_cast<std::streamsize>(ckpt.params.size() * sizeof(double)));
  if (!out) throw IngestionError("write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open checkpoint " + path.string());
  std::size_t offset = 0;
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw IngestionError("not a sepdiff checkpoint: " + path.string(), 0);
  }
  offset = 4;
  const auto header_len = get<std::uint32_t>(in, offset, "header length");
  Checkpoint ckpt;
  ckpt.header_json.resize(header_len);
  if (!in.read(ckpt.header_json.data(), header_len)) throw IngestionError("truncated checkpoint header", offset);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(ckpt.header_json);
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(std::string("malformed checkpoint header: ") + e.what(), offset);
  }
  offset += header_len;
  const auto count = get<std::uint64_t>(in, offset, "parameter count");
  if (!header.contains("param_count") || header["param_count"].get<std::uint64_t>() != count) {
    throw IngestionError("checkpoint parameter count disagrees with header", offset - 8);
  }
  ckpt.params.resize(count);
  if (!in.read(reinterpret_cast<char*>(ckpt.params.data()), static_cast<std::streamsize>(count * sizeof(double)))) {
    throw IngestionError("truncated checkpoint parameters", offset);
  }
  return ckpt;
}

void save_denoiser(const std::filesystem::path& path, const ToyDenoiser& model) {
  const auto& t = model.topology();
  const auto& s = model.schedule();
  nlohmann::json h;
  h["model"] = to_string(model.kind());
  h["topology"] = {{"channels", t.channels},
                   {"kernel", t.kernel},
                   {"embed_dim", t.embed_dim},
                   {"class_count", t.class_count},
                   {"data_std", t.data_std}};
  h["schedule"] = {{"steps", s.steps()},
                   {"betas", std::vector<double>(s.betas().begin(), s.betas().end())},
                   {"hash", hex64(s.hash())}};
  h["class_vocab"] = model.class_vocab();
  Checkpoint ckpt{h.dump(), std::vector<double>(model.parameters().begin(), model.parameters().end())};
  write_checkpoint(path, ckpt);
}

ToyDenoiser load_denoiser(const std::filesystem::path& path, const NoiseSchedule* expected) {
  Checkpoint ckpt = read_checkpoint(path);
  try {
    const auto h = nlohmann::json::parse(ckpt.header_json);
    if (h.value("model", "") != to_string(ModelKind::kToyDenoiser)) {
      throw SchemaError("checkpoint " + path.string() + " does not hold a toy denoiser");
    }
    const auto& jt = h.at("topology");
    DenoiserTopology topo;
    topo.channels = jt.at("channels");
    topo.kernel = jt.at("kernel");
    topo.embed_dim = jt.at("embed_dim");
    topo.class_count = jt.at("class_count");
    topo.data_std = jt.at("data_std");
    NoiseSchedule schedule = NoiseSchedule::from_betas(h.at("schedule").at("betas").get<std::vector<double>>());
    if (hex64(schedule.hash()) != h.at("schedule").at("hash").get<std::string>()) {
      throw IngestionError("checkpoint schedule hash does not match its beta table");
    }
    if (expected != nullptr && !(*expected == schedule)) {
      throw ConfigError("checkpoint " + path.string() + " was trained with a different noise schedule");
    }
    return ToyDenoiser(topo, std::move(schedule), std::move(ckpt.params),
                       h.at("class_vocab").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace sepdiff
