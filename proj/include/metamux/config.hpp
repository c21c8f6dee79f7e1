#pragma once

// Experiment configuration: JSON parsing with field-level errors, and the
// inverse serialization (parse(serialize(c)) == c).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "metamux/channel.hpp"
#include "metamux/decoder.hpp"
#include "metamux/error.hpp"
#include "metamux/waveform.hpp"

namespace metamux {

enum class DecoderChoice { Auto, Viterbi, Smc };

inline std::string to_string(DecoderChoice d) {
  switch (d) {
    case DecoderChoice::Viterbi: return "viterbi";
    case DecoderChoice::Smc: return "smc";
    default: return "auto";
  }
}

// Interferer settings. Unset fields fall back to the preset; frequencies are
// in Hz for the configured symbol time (f_s = K / T).
struct InterfererConfig {
  std::string preset = "desk";  // desk | wide
  std::optional<unsigned> order;
  std::optional<double> symbol_rate_hz;
  std::optional<double> offset_hz;
  std::optional<double> power_db;
  std::optional<double> rolloff;

  bool operator==(const InterfererConfig&) const = default;

  InterfererParams resolve(double sample_rate_hz) const {
    InterfererParams p;
    if (preset == "desk") {
      p = InterfererParams::desk_preset(sample_rate_hz);
    } else if (preset == "wide") {
      p = InterfererParams::wide_preset(sample_rate_hz);
    } else {
      throw ConfigError("interferer.preset: unknown preset '" + preset + "' (expected desk or wide)");
    }
    if (order) p.order = *order;
    if (rolloff) p.rolloff = *rolloff;
    if (symbol_rate_hz) p.symbol_rate_hz = *symbol_rate_hz;
    if (offset_hz) p.carrier_offset_hz = *offset_hz;
    if (power_db) p.power_ratio_db = *power_db;
    p.validate();
    return p;
  }
};

struct CapacitySettings {
  std::vector<std::size_t> k_list{2, 4, 8, 10, 20, 30, 50, 60, 100, 200, 300, 450, 600, 900, 1200, 1800};
  double target_bits = 0.0;  // 0 selects 2K

  bool operator==(const CapacitySettings&) const = default;
};

struct SpectrumSettings {
  std::size_t pad_factor = 256;
  std::vector<double> levels_db{35.0, 50.0};
  std::vector<double> fractions{0.99};
  std::size_t welch_symbols = 0;  // random-data Welch estimate when > 0
  std::size_t welch_segment = 4096;

  bool operator==(const SpectrumSettings&) const = default;
};

struct ExperimentConfig {
  WaveformSpec waveform{};
  std::size_t k = 8;
  double symbol_time = 1.0;
  std::string alphabet = "cbpsk";
  std::vector<double> ebn0_db{10.0};
  std::size_t bits = 100000;
  std::size_t min_errors = 100;  // 0 disables early stop
  std::size_t frame_symbols = 0;  // 0 selects 10 K
  DecoderChoice decoder = DecoderChoice::Auto;
  SmcConfig smc{};
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool timing = false;
  double penalty_ber = 1e-3;
  std::optional<InterfererConfig> interferer;
  CapacitySettings capacity{};
  SpectrumSettings spectrum{};
  std::string out = "out";

  bool operator==(const ExperimentConfig&) const = default;

  std::size_t effective_frame_symbols() const { return frame_symbols ? frame_symbols : 10 * k; }
  double sample_rate() const { return static_cast<double>(k) / symbol_time; }

  void validate() const {
    detail::require(k >= 1, "k: must be >= 1");
    detail::require(symbol_time > 0.0, "symbol_time: must be positive");
    Alphabet::parse(alphabet);
    detail::require(!ebn0_db.empty(), "ebn0_db: grid must be nonempty");
    detail::require(std::is_sorted(ebn0_db.begin(), ebn0_db.end()) &&
                        std::adjacent_find(ebn0_db.begin(), ebn0_db.end()) == ebn0_db.end(),
                    "ebn0_db: grid must be strictly increasing");
    for (double e : ebn0_db) detail::require(!std::isnan(e), "ebn0_db: NaN entry");
    detail::require(bits >= 10000, "bits: budget must be >= 10000");
    try {
      smc.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("smc: ") + e.what());
    }
    detail::require(penalty_ber > 0.0 && penalty_ber < 0.5, "penalty_ber: must lie in (0, 0.5)");
    detail::require(!capacity.k_list.empty(), "capacity.k_list: must be nonempty");
    for (auto kk : capacity.k_list) detail::require(kk >= 1, "capacity.k_list: entries must be >= 1");
    detail::require(capacity.target_bits >= 0.0, "capacity.target_bits: must be >= 0");
    detail::require(spectrum.pad_factor >= 64, "spectrum.pad_factor: must be >= 64");
    for (double l : spectrum.levels_db) detail::require(l > 0.0, "spectrum.levels_db: entries must be positive");
    for (double f : spectrum.fractions)
      detail::require(f > 0.0 && f < 1.0, "spectrum.fractions: entries must lie in (0, 1)");
    if (interferer) {
      try {
        interferer->resolve(sample_rate());
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("interferer: ") + e.what());
      }
    }
    detail::require(!out.empty(), "out: output directory must be set");
  }
};

// "start:step:stop" inclusive, values rounded to 1e-9 dB.
inline std::vector<double> parse_range(const std::string& text) {
  std::vector<double> parts;
  std::size_t pos = 0;
  while (true) {
    const auto colon = text.find(':', pos);
    const auto piece = text.substr(pos, colon == std::string::npos ? std::string::npos : colon - pos);
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(piece, &used));
      if (used != piece.size()) throw std::invalid_argument(piece);
    } catch (const std::exception&) {
      throw ConfigError("range '" + text + "': expected start:step:stop");
    }
    if (colon == std::string::npos) break;
    pos = colon + 1;
  }
  if (parts.size() == 1) return parts;
  detail::require(parts.size() == 3, "range '" + text + "': expected start:step:stop");
  const double start = parts[0], step = parts[1], stop = parts[2];
  detail::require(step > 0.0, "range '" + text + "': step must be positive");
  detail::require(stop >= start, "range '" + text + "': stop must be >= start");
  std::vector<double> out;
  for (std::size_t i = 0;; ++i) {
    const double v = std::round((start + static_cast<double>(i) * step) * 1e9) / 1e9;
    if (v > stop + 1e-9) break;
    out.push_back(v);
  }
  return out;
}

namespace detail {

template <class T>
T field(const nlohmann::json& j, const char* key, const std::string& path, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + key + ": wrong type");
  }
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys,
                           const std::string& path) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const bool known = std::any_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; });
    if (!known) throw ConfigError(path + it.key() + ": unknown key");
  }
}

inline double ebn0_value(const nlohmann::json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw ConfigError("ebn0_db: entries must be numbers or \"inf\"");
}

inline nlohmann::json ebn0_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  detail::reject_unknown(j,
                         {"waveform", "k", "symbol_time", "alphabet", "ebn0_db", "bits", "min_errors",
                          "frame_symbols", "decoder", "smc", "seed", "threads", "timing", "penalty_ber",
                          "interferer", "capacity", "spectrum", "out"},
                         "");
  ExperimentConfig c;
  if (!j.contains("seed")) throw ConfigError("seed: required (no wall-clock seeding)");
  c.seed = detail::field<std::uint64_t>(j, "seed", "", 0);

  if (j.contains("waveform")) {
    const auto& w = j["waveform"];
    if (w.is_string()) {
      c.waveform = WaveformSpec::parse(w.get<std::string>());
    } else if (w.is_object()) {
      detail::reject_unknown(w, {"name", "nbar", "bt"}, "waveform.");
      c.waveform = WaveformSpec::parse(detail::field<std::string>(w, "name", "waveform.", "rect"));
      c.waveform.params.nbar = detail::field<int>(w, "nbar", "waveform.", 0);
      c.waveform.params.bt = detail::field<double>(w, "bt", "waveform.", 0.3);
    } else {
      throw ConfigError("waveform: expected a name or an object");
    }
  }
  c.k = detail::field<std::size_t>(j, "k", "", c.k);
  c.symbol_time = detail::field<double>(j, "symbol_time", "", c.symbol_time);
  c.alphabet = detail::field<std::string>(j, "alphabet", "", c.alphabet);
  if (j.contains("ebn0_db")) {
    const auto& e = j["ebn0_db"];
    c.ebn0_db.clear();
    if (e.is_string()) {
      c.ebn0_db = parse_range(e.get<std::string>());
    } else if (e.is_array()) {
      for (const auto& v : e) c.ebn0_db.push_back(detail::ebn0_value(v));
    } else if (e.is_number()) {
      c.ebn0_db.push_back(e.get<double>());
    } else {
      throw ConfigError("ebn0_db: expected a list, a number or \"start:step:stop\"");
    }
  }
  c.bits = detail::field<std::size_t>(j, "bits", "", c.bits);
  c.min_errors = detail::field<std::size_t>(j, "min_errors", "", c.min_errors);
  c.frame_symbols = detail::field<std::size_t>(j, "frame_symbols", "", c.frame_symbols);
  {
    const auto d = detail::field<std::string>(j, "decoder", "", "auto");
    if (d == "auto") c.decoder = DecoderChoice::Auto;
    else if (d == "viterbi") c.decoder = DecoderChoice::Viterbi;
    else if (d == "smc") c.decoder = DecoderChoice::Smc;
    else throw ConfigError("decoder: expected auto, viterbi or smc");
  }
  if (j.contains("smc")) {
    const auto& s = j["smc"];
    detail::reject_unknown(s, {"particles", "resample_threshold", "lag", "allow_degenerate"}, "smc.");
    c.smc.particles = detail::field<std::size_t>(s, "particles", "smc.", c.smc.particles);
    c.smc.resample_threshold = detail::field<double>(s, "resample_threshold", "smc.", c.smc.resample_threshold);
    c.smc.lag = detail::field<std::size_t>(s, "lag", "smc.", c.smc.lag);
    c.smc.allow_degenerate = detail::field<bool>(s, "allow_degenerate", "smc.", false);
  }
  c.threads = detail::field<unsigned>(j, "threads", "", c.threads);
  c.timing = detail::field<bool>(j, "timing", "", c.timing);
  c.penalty_ber = detail::field<double>(j, "penalty_ber", "", c.penalty_ber);
  if (j.contains("interferer") && !j["interferer"].is_null()) {
    const auto& f = j["interferer"];
    detail::reject_unknown(f, {"preset", "order", "symbol_rate_hz", "offset_hz", "power_db", "rolloff"},
                           "interferer.");
    InterfererConfig ic;
    ic.preset = detail::field<std::string>(f, "preset", "interferer.", ic.preset);
    auto opt = [&](const char* key, auto& slot) {
      using V = typename std::remove_reference_t<decltype(slot)>::value_type;
      if (f.contains(key)) slot = detail::field<V>(f, key, "interferer.", V{});
    };
    opt("order", ic.order);
    opt("symbol_rate_hz", ic.symbol_rate_hz);
    opt("offset_hz", ic.offset_hz);
    opt("rolloff", ic.rolloff);
    if (f.contains("power_db")) {
      const auto& p = f["power_db"];
      ic.power_db = p.is_string() ? detail::ebn0_value(p) : detail::field<double>(f, "power_db", "interferer.", 0.0);
    }
    c.interferer = ic;
  }
  if (j.contains("capacity")) {
    const auto& s = j["capacity"];
    detail::reject_unknown(s, {"k_list", "target_bits"}, "capacity.");
    c.capacity.k_list = detail::field<std::vector<std::size_t>>(s, "k_list", "capacity.", c.capacity.k_list);
    c.capacity.target_bits = detail::field<double>(s, "target_bits", "capacity.", 0.0);
  }
  if (j.contains("spectrum")) {
    const auto& s = j["spectrum"];
    detail::reject_unknown(s, {"pad_factor", "levels_db", "fractions", "welch_symbols", "welch_segment"},
                           "spectrum.");
    auto& sp = c.spectrum;
    sp.pad_factor = detail::field<std::size_t>(s, "pad_factor", "spectrum.", sp.pad_factor);
    sp.levels_db = detail::field<std::vector<double>>(s, "levels_db", "spectrum.", sp.levels_db);
    sp.fractions = detail::field<std::vector<double>>(s, "fractions", "spectrum.", sp.fractions);
    sp.welch_symbols = detail::field<std::size_t>(s, "welch_symbols", "spectrum.", sp.welch_symbols);
    sp.welch_segment = detail::field<std::size_t>(s, "welch_segment", "spectrum.", sp.welch_segment);
  }
  c.out = detail::field<std::string>(j, "out", "", c.out);
  c.validate();
  return c;
}

inline nlohmann::json serialize_config(const ExperimentConfig& c) {
  nlohmann::json j;
  j["waveform"] = {{"name", c.waveform.name()}, {"nbar", c.waveform.params.nbar}, {"bt", c.waveform.params.bt}};
  j["k"] = c.k;
  j["symbol_time"] = c.symbol_time;
  j["alphabet"] = c.alphabet;
  j["ebn0_db"] = nlohmann::json::array();
  for (double e : c.ebn0_db) j["ebn0_db"].push_back(detail::ebn0_json(e));
  j["bits"] = c.bits;
  j["min_errors"] = c.min_errors;
  j["frame_symbols"] = c.frame_symbols;
  j["decoder"] = to_string(c.decoder);
  j["smc"] = {{"particles", c.smc.particles},
              {"resample_threshold", c.smc.resample_threshold},
              {"lag", c.smc.lag},
              {"allow_degenerate", c.smc.allow_degenerate}};
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["timing"] = c.timing;
  j["penalty_ber"] = c.penalty_ber;
  if (c.interferer) {
    const auto& f = *c.interferer;
    nlohmann::json ij;
    ij["preset"] = f.preset;
    if (f.order) ij["order"] = *f.order;
    if (f.symbol_rate_hz) ij["symbol_rate_hz"] = *f.symbol_rate_hz;
    if (f.offset_hz) ij["offset_hz"] = *f.offset_hz;
    if (f.power_db) ij["power_db"] = detail::ebn0_json(*f.power_db);
    if (f.rolloff) ij["rolloff"] = *f.rolloff;
    j["interferer"] = ij;
  }
  j["capacity"] = {{"k_list", c.capacity.k_list}, {"target_bits", c.capacity.target_bits}};
  j["spectrum"] = {{"pad_factor", c.spectrum.pad_factor},
                   {"levels_db", c.spectrum.levels_db},
                   {"fractions", c.spectrum.fractions},
                   {"welch_symbols", c.spectrum.welch_symbols},
                   {"welch_segment", c.spectrum.welch_segment}};
  j["out"] = c.out;
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  try {
    return parse_config(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config: " + std::string(e.what()));
  }
}

}  // namespace metamux
