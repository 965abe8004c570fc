// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "sepdiff/errors.hpp"
#include "sepdiff/signal.hpp"

namespace sepdiff {

namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  template <typename T>
  T read() {
    if (remaining() < sizeof(T)) throw IngestionError("unexpected end of WAV data", pos_);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string tag() {
    if (remaining() < 4) throw IngestionError("unexpected end of WAV data", pos_);
    std::string s(bytes_.data() + pos_, 4);
    pos_ += 4;
    return s;
  }

  void skip(std::size_t n) {
    if (remaining() < n) throw IngestionError("chunk extends past end of file", pos_);
    pos_ += n;
  }

  const char* data() const { return bytes_.data() + pos_; }

 private:
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

template <typename T>
void put(std::vector<char>& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

void put_tag(std::vector<char>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

Waveform read_wav(const std::filesystem::path& path, int target_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path.string());
  ByteReader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));
  const std::string where = path.string() + ": ";

  if (r.tag() != "RIFF") throw IngestionError(where + "missing RIFF header", 0);
  r.read<std::uint32_t>();
  if (r.tag() != "WAVE") throw IngestionError(where + "missing WAVE tag", 8);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (r.remaining() >= 8) {
    const std::size_t chunk_at = r.pos();
    const std::string id = r.tag();
    const auto size = r.read<std::uint32_t>();
    if (id == "fmt ") {
      if (size < 16) throw IngestionError(where + "fmt chunk too short", chunk_at);
      const std::size_t body = r.pos();
      format = r.read<std::uint16_t>();
      channels = r.read<std::uint16_t>();
      rate = r.read<std::uint32_t>();
      r.read<std::uint32_t>();
      r.read<std::uint16_t>();
      bits = r.read<std::uint16_t>();
      if (format == kFormatExtensible) {
        if (size < 40) throw IngestionError(where + "extensible fmt chunk too short", chunk_at);
        r.read<std::uint16_t>();
        r.read<std::uint16_t>();
        r.read<std::uint32_t>();
        format = r.read<std::uint16_t>();  // first two bytes of the subformat GUID
      }
      r.skip(size - (r.pos() - body) + (size & 1u));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw IngestionError(where + "data chunk before fmt chunk", chunk_at);
      if (channels == 0) throw IngestionError(where + "zero channels", chunk_at);
      const bool pcm16 = format == kFormatPcm && bits == 16;
      const bool f32 = format == kFormatFloat && bits == 32;
      if (!pcm16 && !f32) {
        throw IngestionError(where + "unsupported codec (format " + std::to_string(format) + ", " +
                                 std::to_string(bits) + " bits)",
                             chunk_at);
      }
      const std::size_t bytes = std::min<std::size_t>(size, r.remaining());
      const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
      const std::size_t frames = bytes / frame_bytes;
      Waveform w;
      w.rate = static_cast<int>(rate);
      w.samples.resize(frames);
      const char* p = r.data();
      for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
          const char* q = p + (i * channels + c) * (bits / 8);
          if (pcm16) {
            std::int16_t v;
            std::memcpy(&v, q, 2);
            acc += v / 32768.0;
          } else {
            float v;
            std::memcpy(&v, q, 4);
            acc += v;
          }
        }
        w.samples[i] = channels == 1 ? acc : acc / channels;
      }
      if (target_rate > 0 && w.rate != target_rate) {
        w.samples = resample(w.samples, w.rate, target_rate);
        w.rate = target_rate;
      }
      return w;
    } else {
      r.skip(size + (size & 1u));
    }
  }
  throw IngestionError(where + "no data chunk", r.pos());
}

void write_wav(const std::filesystem::path& path, const Waveform& w, WavEncoding encoding) {
  w.validate();
  const bool f32 = encoding == WavEncoding::kFloat32;
  const std::uint16_t bits = f32 ? 32 : 16;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * (bits / 8));

  std::vector<char> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put<std::uint32_t>(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put<std::uint32_t>(out, 16);
  put<std::uint16_t>(out, f32 ? kFormatFloat : kFormatPcm);
  put<std::uint16_t>(out, 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(w.rate));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(w.rate) * (bits / 8));
  put<std::uint16_t>(out, bits / 8);
  put<std::uint16_t>(out, bits);
  put_tag(out, "data");
  put<std::uint32_t>(out, data_bytes);
  for (double v : w.samples) {
    if (f32) {
      put<float>(out, static_cast<float>(v));
    } else {
      const double s = std::clamp(std::nearbyint(v * 32768.0), -32768.0, 32767.0);
      put<std::int16_t>(out, static_cast<std::int16_t>(s));
    }
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IngestionError("cannot open " + path.string() + " for writing");
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw IngestionError("failed writing " + path.string());
}

}  // namespace sepdiff
