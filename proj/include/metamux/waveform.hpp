#pragma once

// Pulse shapes of one overlapped symbol: K taps spanning one symbol time T.

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metamux/error.hpp"

namespace metamux {

// Custom covers hand-specified taps (test channels, imported responses).
enum class PulseKind { Rectangular, Taylor, Gaussian, Hamming, Custom };

struct PulseParams {
  double sidelobe_db = 35.0;  // Taylor only
  int nbar = 0;               // Taylor only; 0 selects the per-level default
  double bt = 0.3;            // Gaussian bandwidth-time product

  bool operator==(const PulseParams&) const = default;
};

// Default Taylor nbar for the two supported sidelobe levels. Other levels
// need an explicit nbar.
inline std::optional<int> default_taylor_nbar(double sidelobe_db) {
  if (sidelobe_db == 35.0) return 4;
  if (sidelobe_db == 50.0) return 8;
  return std::nullopt;
}

// Taylor window of length n (symmetric), peak near 1. Series form:
//   w[k] = 1 + 2 * sum_{m=1}^{nbar-1} F_m cos(2 pi m (k - n/2 + 1/2) / n)
inline std::vector<double> taylor_window(std::size_t n, double sidelobe_db,
                                         int nbar) {
  detail::require(n >= 1, "taylor_window: length must be >= 1");
  detail::require(nbar >= 1, "taylor_window: nbar must be >= 1");
  detail::require(sidelobe_db > 0.0, "taylor_window: sidelobe level must be positive");

  const double b = std::pow(10.0, sidelobe_db / 20.0);
  const double a = std::acosh(b) / std::numbers::pi;
  const double a2 = a * a;
  const double nb = static_cast<double>(nbar);
  const double s2 = nb * nb / (a2 + (nb - 0.5) * (nb - 0.5));

  std::vector<double> coeff(static_cast<std::size_t>(nbar - 1));
  for (int m = 1; m < nbar; ++m) {
    const double m2 = static_cast<double>(m) * m;
    double numer = (m % 2 == 1) ? 1.0 : -1.0;
    double denom = 2.0;
    for (int i = 1; i < nbar; ++i) {
      const double half = i - 0.5;
      numer *= 1.0 - m2 / s2 / (a2 + half * half);
      if (i != m) denom *= 1.0 - m2 / (static_cast<double>(i) * i);
    }
    coeff[static_cast<std::size_t>(m - 1)] = numer / denom;
  }

  std::vector<double> w(n);
  const double len = static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double x = static_cast<double>(k) - len / 2.0 + 0.5;
    double acc = 1.0;
    for (int m = 1; m < nbar; ++m) {
      acc += 2.0 * coeff[static_cast<std::size_t>(m - 1)] *
             std::cos(2.0 * std::numbers::pi * m * x / len);
    }
    w[k] = acc;
  }
  return w;
}

// Sampled impulse response of one symbol, normalized to unit energy.
class PulseShape {
 public:
  std::span<const double> taps() const noexcept { return taps_; }
  std::size_t samples_per_symbol() const noexcept { return taps_.size(); }
  double symbol_time() const noexcept { return symbol_time_; }
  double sample_rate() const noexcept {
    return static_cast<double>(taps_.size()) / symbol_time_;
  }
  PulseKind kind() const noexcept { return kind_; }
  const PulseParams& params() const noexcept { return params_; }

  double energy() const noexcept {
    double e = 0.0;
    for (double h : taps_) e += h * h;
    return e;
  }

  // Pulse built from explicit taps, normalized to unit energy. Used for
  // hand-written test channels.
  static PulseShape from_taps(std::vector<double> taps, double symbol_time = 1.0) {
    detail::require(!taps.empty(), "pulse: taps must be nonempty");
    return PulseShape(std::move(taps), symbol_time, PulseKind::Custom, PulseParams{});
  }

  // Same, without the energy normalization (readable integer taps in tests).
  static PulseShape raw(std::vector<double> taps, double symbol_time = 1.0) {
    detail::require(!taps.empty(), "pulse: taps must be nonempty");
    PulseShape p;
    p.taps_ = std::move(taps);
    p.symbol_time_ = symbol_time;
    p.kind_ = PulseKind::Custom;
    return p;
  }

  friend PulseShape make_pulse(PulseKind, long, PulseParams, double);

 private:
  PulseShape() = default;
  PulseShape(std::vector<double> taps, double symbol_time, PulseKind kind,
             PulseParams params)
      : taps_(std::move(taps)), symbol_time_(symbol_time), kind_(kind), params_(params) {
    double e = 0.0;
    for (double h : taps_) {
      detail::require(std::isfinite(h), "pulse: non-finite tap");
      e += h * h;
    }
    detail::require(e > 0.0, "pulse: zero-energy taps");
    const double scale = 1.0 / std::sqrt(e);
    for (double& h : taps_) h *= scale;
  }

  std::vector<double> taps_;
  double symbol_time_ = 1.0;
  PulseKind kind_ = PulseKind::Rectangular;
  PulseParams params_{};
};

inline PulseShape make_pulse(PulseKind kind, long k, PulseParams params = {},
                             double symbol_time = 1.0) {
  detail::require(k >= 1, "make_pulse: K must be >= 1");
  detail::require(symbol_time > 0.0, "make_pulse: symbol time must be positive");
  const auto n = static_cast<std::size_t>(k);
  std::vector<double> taps(n);

  switch (kind) {
    case PulseKind::Rectangular:
      for (auto& h : taps) h = 1.0;
      break;
    case PulseKind::Taylor: {
      if (params.nbar == 0) {
        const auto nbar = default_taylor_nbar(params.sidelobe_db);
        detail::require(nbar.has_value(),
                        "make_pulse: Taylor sidelobe level " +
                            std::to_string(params.sidelobe_db) +
                            " dB needs an explicit nbar");
        params.nbar = *nbar;
      }
      taps = taylor_window(n, params.sidelobe_db, params.nbar);
      break;
    }
    case PulseKind::Gaussian: {
      detail::require(params.bt > 0.0, "make_pulse: Gaussian BT must be positive");
      // exp(-2 pi^2 B^2 t^2 / ln 2) with t in units of T, B = BT / T.
      const double c = 2.0 * std::numbers::pi * std::numbers::pi * params.bt * params.bt /
                       std::numbers::ln2;
      const double center = (static_cast<double>(n) - 1.0) / 2.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double t = (static_cast<double>(i) - center) / static_cast<double>(n);
        taps[i] = std::exp(-c * t * t);
      }
      break;
    }
    case PulseKind::Hamming:
      if (n == 1) {
        taps[0] = 1.0;
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          taps[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                           static_cast<double>(n - 1));
        }
      }
      break;
    default:
      throw ConfigError("make_pulse: unknown pulse kind");
  }
  return PulseShape(std::move(taps), symbol_time, kind, params);
}

inline std::string_view to_string(PulseKind kind) {
  switch (kind) {
    case PulseKind::Rectangular: return "rectangular";
    case PulseKind::Taylor: return "taylor";
    case PulseKind::Gaussian: return "gaussian";
    case PulseKind::Hamming: return "hamming";
    case PulseKind::Custom: return "custom";
  }
  return "unknown";
}

inline PulseKind parse_pulse_kind(std::string_view name) {
  if (name == "rectangular") return PulseKind::Rectangular;
  if (name == "taylor") return PulseKind::Taylor;
  if (name == "gaussian") return PulseKind::Gaussian;
  if (name == "hamming") return PulseKind::Hamming;
  throw ConfigError("unknown pulse kind '" + std::string(name) + "'");
}

// Named waveform as used on the command line and in configs:
// rect, taylor35, taylor50, gaussian, hamming.
struct WaveformSpec {
  PulseKind kind = PulseKind::Rectangular;
  PulseParams params{};

  bool operator==(const WaveformSpec&) const = default;

  PulseShape make(long k, double symbol_time = 1.0) const {
    return make_pulse(kind, k, params, symbol_time);
  }

  std::string name() const {
    switch (kind) {
      case PulseKind::Rectangular: return "rect";
      case PulseKind::Gaussian: return "gaussian";
      case PulseKind::Hamming: return "hamming";
      case PulseKind::Custom: return "custom";
      case PulseKind::Taylor: {
        const auto level = static_cast<long>(std::lround(params.sidelobe_db));
        return "taylor" + std::to_string(level);
      }
    }
    return "unknown";
  }

  static WaveformSpec parse(std::string_view name) {
    WaveformSpec w;
    if (name == "rect" || name == "rectangular") {
      w.kind = PulseKind::Rectangular;
    } else if (name == "taylor35") {
      w.kind = PulseKind::Taylor;
      w.params.sidelobe_db = 35.0;
    } else if (name == "taylor50") {
      w.kind = PulseKind::Taylor;
      w.params.sidelobe_db = 50.0;
    } else if (name == "gaussian") {
      w.kind = PulseKind::Gaussian;
    } else if (name == "hamming") {
      w.kind = PulseKind::Hamming;
    } else {
      throw ConfigError("unknown waveform '" + std::string(name) +
                        "' (expected rect, taylor35, taylor50, gaussian, hamming)");
    }
    return w;
  }
};

inline void write_taps_csv(std::ostream& out, const PulseShape& pulse) {
  out << "index,value\n";
  char buf[64];
  const auto taps = pulse.taps();
  for (std::size_t i = 0; i < taps.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, taps[i]);
    out << buf;
  }
}

}  // namespace metamux
