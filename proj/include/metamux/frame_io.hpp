#pragma once

// Binary sample records: interleaved little-endian float64 (re, im) pairs,
// with a JSON sidecar describing the stream.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "metamux/alphabet.hpp"
#include "metamux/decoder.hpp"
#include "metamux/error.hpp"
#include "metamux/waveform.hpp"

namespace metamux {

struct FrameHeader {
  std::size_t k = 1;
  double symbol_time = 1.0;
  std::string alphabet = "cbpsk";
  std::string pulse_kind = "rectangular";
  double sidelobe_db = 35.0;
  int nbar = 0;
  double bt = 0.3;
  std::size_t frame_symbols = 0;
  std::optional<double> noise_variance;
  std::optional<std::uint64_t> seed;

  bool operator==(const FrameHeader&) const = default;
};

inline nlohmann::json to_json(const FrameHeader& h) {
  nlohmann::json j;
  j["k"] = h.k;
  j["symbol_time"] = h.symbol_time;
  j["alphabet"] = h.alphabet;
  j["pulse"] = {{"kind", h.pulse_kind}, {"sidelobe_db", h.sidelobe_db}, {"nbar", h.nbar}, {"bt", h.bt}};
  j["frame_symbols"] = h.frame_symbols;
  j["noise_variance"] = h.noise_variance ? nlohmann::json(*h.noise_variance) : nlohmann::json(nullptr);
  j["seed"] = h.seed ? nlohmann::json(*h.seed) : nlohmann::json(nullptr);
  return j;
}

inline FrameHeader frame_header_from_json(const nlohmann::json& j) {
  try {
    FrameHeader h;
    h.k = j.at("k").get<std::size_t>();
    h.symbol_time = j.at("symbol_time").get<double>();
    h.alphabet = j.at("alphabet").get<std::string>();
    const auto& p = j.at("pulse");
    h.pulse_kind = p.at("kind").get<std::string>();
    h.sidelobe_db = p.value("sidelobe_db", 35.0);
    h.nbar = p.value("nbar", 0);
    h.bt = p.value("bt", 0.3);
    h.frame_symbols = j.at("frame_symbols").get<std::size_t>();
    if (j.contains("noise_variance") && !j["noise_variance"].is_null())
      h.noise_variance = j["noise_variance"].get<double>();
    if (j.contains("seed") && !j["seed"].is_null()) h.seed = j["seed"].get<std::uint64_t>();
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("frame sidecar: ") + e.what());
  }
}

inline FrameHeader make_frame_header(const PulseShape& pulse, const Alphabet& alphabet,
                                     std::size_t frame_symbols) {
  FrameHeader h;
  h.k = pulse.samples_per_symbol();
  h.symbol_time = pulse.symbol_time();
  h.alphabet = alphabet.name();
  h.pulse_kind = std::string(to_string(pulse.kind()));
  h.sidelobe_db = pulse.params().sidelobe_db;
  h.nbar = pulse.params().nbar;
  h.bt = pulse.params().bt;
  h.frame_symbols = frame_symbols;
  return h;
}

inline PulseShape pulse_from_header(const FrameHeader& h) {
  const auto kind = parse_pulse_kind(h.pulse_kind);
  PulseParams params;
  params.sidelobe_db = h.sidelobe_db;
  params.nbar = h.nbar;
  params.bt = h.bt;
  return make_pulse(kind, static_cast<long>(h.k), params, h.symbol_time);
}

namespace detail {

inline void put_le(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

inline double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
  return std::bit_cast<double>(bits);
}

}  // namespace detail

inline void write_samples(std::ostream& out, std::span<const cd> samples) {
  for (const auto& s : samples) {
    detail::put_le(out, s.real());
    detail::put_le(out, s.imag());
  }
}

inline std::vector<cd> read_samples(std::istream& in) {
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (raw.size() % 16 != 0) throw ConfigError("sample record: size is not a multiple of 16 bytes");
  std::vector<cd> out(raw.size() / 16);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = cd{detail::get_le(raw.data() + 16 * i), detail::get_le(raw.data() + 16 * i + 8)};
  return out;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& record) {
  auto p = record;
  p += ".json";
  return p;
}

inline void save_frame(const std::filesystem::path& path, std::span<const cd> samples,
                       const FrameHeader& header) {
  std::ofstream bin(path, std::ios::binary);
  if (!bin) throw ConfigError("cannot write " + path.string());
  write_samples(bin, samples);
  std::ofstream js(sidecar_path(path));
  if (!js) throw ConfigError("cannot write " + sidecar_path(path).string());
  js << to_json(header).dump(2) << '\n';
}

struct LoadedFrame {
  FrameHeader header;
  std::vector<cd> samples;
};

inline LoadedFrame load_frame(const std::filesystem::path& path) {
  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw ConfigError("cannot read " + path.string());
  std::ifstream js(sidecar_path(path));
  if (!js) throw ConfigError("cannot read " + sidecar_path(path).string());
  LoadedFrame f;
  try {
    f.header = frame_header_from_json(nlohmann::json::parse(js));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("frame sidecar: ") + e.what());
  }
  f.samples = read_samples(bin);
  if (f.header.frame_symbols && f.samples.size() != f.header.frame_symbols + f.header.k - 1)
    throw ConfigError("frame: sample count does not match frame_symbols + K - 1");
  return f;
}

inline nlohmann::json to_json(const DecodeDiagnostics& d) {
  nlohmann::json j;
  j["decoder"] = d.decoder;
  if (d.decoder == "viterbi") {
    j["states"] = d.states;
  } else {
    j["particles"] = d.particles;
    j["lag"] = d.lag;
    j["resample_count"] = d.resample_count;
    j["min_effective_particles"] = d.min_effective_particles;
    j["underflow_resets"] = d.underflow_resets;
  }
  return j;
}

inline std::string bits_to_hex(std::span<const std::uint8_t> bits) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  for (std::size_t i = 0; i < bits.size(); i += 4) {
    unsigned v = 0;
    for (std::size_t b = 0; b < 4; ++b) v = (v << 1) | (i + b < bits.size() ? (bits[i + b] & 1U) : 0U);
    out.push_back(digits[v]);
  }
  return out;
}

}  // namespace metamux
