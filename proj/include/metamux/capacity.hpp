#pragma once

// Parallel-channel capacity of the overlapped system: waterfilling,
// equal-power allocation, the finite-frame factor and the Eb/N0 form.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metamux/error.hpp"
#include "metamux/mux.hpp"
#include "metamux/waveform.hpp"

namespace metamux {

enum class CapacityMode { Waterfill, EqualPower };

inline std::string_view to_string(CapacityMode m) {
  return m == CapacityMode::Waterfill ? "waterfill" : "equal";
}

struct PowerAllocation {
  double mu = 0.0;              // water level
  std::vector<double> powers;   // per subchannel, input order
  double total_power = 0.0;
  double noise_power = 0.0;
};

// Gains below this fraction of the largest singular value count as zero.
inline constexpr double kSubchannelFloor = 1e-12;

// P_i = (mu - N / lambda_i^2)^+ with sum P_i = P, solved exactly by scanning
// active sets in order of increasing N / lambda_i^2.
inline PowerAllocation waterfill(std::span<const double> lambda_sq, double noise_power,
                                 double total_power) {
  detail::require(noise_power > 0.0, "waterfill: noise power must be positive");
  detail::require(total_power >= 0.0, "waterfill: total power must be non-negative");
  double largest = 0.0;
  for (double l : lambda_sq) {
    detail::require(l >= 0.0 && std::isfinite(l), "waterfill: gains must be finite and >= 0");
    largest = std::max(largest, l);
  }
  detail::require(largest > 0.0, "waterfill: all subchannel gains are zero");

  const double floor_sq = largest * kSubchannelFloor * kSubchannelFloor;
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < lambda_sq.size(); ++i)
    if (lambda_sq[i] > floor_sq) active.push_back(i);

  // Extended precision with a single final rounding, so small closed-form
  // cases come out correctly rounded.
  using wide = long double;
  std::vector<wide> inverse(lambda_sq.size(), std::numeric_limits<wide>::infinity());
  for (std::size_t i : active) inverse[i] = static_cast<wide>(noise_power) / static_cast<wide>(lambda_sq[i]);
  std::stable_sort(active.begin(), active.end(),
                   [&](std::size_t a, std::size_t b) { return inverse[a] < inverse[b]; });

  PowerAllocation out;
  out.total_power = total_power;
  out.noise_power = noise_power;
  out.powers.assign(lambda_sq.size(), 0.0);

  wide prefix = 0.0L;
  wide mu = 0.0L;
  for (std::size_t k = 1; k <= active.size(); ++k) {
    prefix += inverse[active[k - 1]];
    mu = (static_cast<wide>(total_power) + prefix) / static_cast<wide>(k);
    if (k == active.size() || mu <= inverse[active[k]]) break;
  }
  out.mu = static_cast<double>(mu);
  for (std::size_t i : active) out.powers[i] = static_cast<double>(std::max<wide>(0.0L, mu - inverse[i]));
  return out;
}

inline PowerAllocation equal_power(std::size_t count, double noise_power, double total_power) {
  detail::require(count > 0, "equal_power: no subchannels");
  PowerAllocation out;
  out.total_power = total_power;
  out.noise_power = noise_power;
  out.powers.assign(count, total_power / static_cast<double>(count));
  out.mu = std::numeric_limits<double>::quiet_NaN();
  return out;
}

// (L_t / K) / (L_t / K + (K - 1) / K); 1 for an unbounded frame.
inline double finite_length_factor(std::optional<std::size_t> frame_symbols, std::size_t k) {
  if (!frame_symbols) return 1.0;
  const double blocks = static_cast<double>(*frame_symbols) / static_cast<double>(k);
  const double tail = (static_cast<double>(k) - 1.0) / static_cast<double>(k);
  return blocks / (blocks + tail);
}

struct CapacityReport {
  CapacityMode mode = CapacityMode::EqualPower;
  std::vector<double> per_subchannel_bits;  // 1/2 log2(1 + P_i lambda_i^2 / N)
  double unfactored_bits = 0.0;             // sum of the above
  double finite_length_factor = 1.0;
  double total_bits_per_symbol = 0.0;       // factor * unfactored
  std::optional<double> spectral_efficiency_bits_s_hz;
  std::optional<double> ebn0_db;
};

// C = factor(L_t, K) * 1/2 sum log2(1 + P_i lambda_i^2 / N). Pass no frame
// length for the unbounded-frame form.
inline CapacityReport capacity(std::span<const double> singular_values,
                               const PowerAllocation& alloc,
                               std::optional<std::size_t> frame_symbols, std::size_t k,
                               CapacityMode mode = CapacityMode::Waterfill) {
  detail::require(alloc.powers.size() == singular_values.size(),
                  "capacity: allocation and spectrum sizes differ");
  detail::require(k >= 1, "capacity: K must be >= 1");
  detail::require(alloc.noise_power > 0.0, "capacity: noise power must be positive");
  CapacityReport r;
  r.mode = mode;
  r.per_subchannel_bits.resize(singular_values.size());
  for (std::size_t i = 0; i < singular_values.size(); ++i) {
    const double snr = alloc.powers[i] * singular_values[i] * singular_values[i] / alloc.noise_power;
    r.per_subchannel_bits[i] = 0.5 * std::log2(1.0 + snr);
    r.unfactored_bits += r.per_subchannel_bits[i];
  }
  r.finite_length_factor = finite_length_factor(frame_symbols, k);
  r.total_bits_per_symbol = r.finite_length_factor * r.unfactored_bits;
  return r;
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

// Capacity at a given Eb/N0 with T = 1 and N0 = 1:
//   EqualPower: 1/2 sum log2(1 + eta (Ts/T) (Eb/N0) lambda_i^2)
//   Waterfill:  P = K eta Eb / T, N = N0 / Ts, then waterfill.
inline CapacityReport capacity_ebn0(std::span<const double> singular_values, double eta,
                                    double ts_over_t, double ebn0_db, CapacityMode mode) {
  detail::require(eta > 0.0, "capacity_ebn0: eta must be positive");
  detail::require(!std::isnan(ebn0_db) && ebn0_db != std::numeric_limits<double>::infinity(),
                  "capacity_ebn0: Eb/N0 must be finite");
  detail::require(ts_over_t > 0.0 && ts_over_t <= 1.0, "capacity_ebn0: Ts/T must lie in (0, 1]");
  const double k_real = 1.0 / ts_over_t;
  const auto k = static_cast<std::size_t>(std::lround(k_real));
  detail::require(std::abs(k_real - static_cast<double>(k)) < 1e-9 * k_real,
                  "capacity_ebn0: Ts/T must equal 1/K");

  const double ebn0 = db_to_linear(ebn0_db);
  const double noise = 1.0 / ts_over_t;             // N0 / Ts
  const double total = static_cast<double>(k) * eta * ebn0;  // K eta Eb / T

  CapacityReport r;
  if (mode == CapacityMode::EqualPower) {
    r.mode = mode;
    r.per_subchannel_bits.resize(singular_values.size());
    for (std::size_t i = 0; i < singular_values.size(); ++i) {
      const double l2 = singular_values[i] * singular_values[i];
      r.per_subchannel_bits[i] = 0.5 * std::log2(1.0 + eta * ts_over_t * ebn0 * l2);
      r.unfactored_bits += r.per_subchannel_bits[i];
    }
    r.total_bits_per_symbol = r.unfactored_bits;
  } else {
    std::vector<double> l2(singular_values.size());
    for (std::size_t i = 0; i < l2.size(); ++i) l2[i] = singular_values[i] * singular_values[i];
    r = capacity(singular_values, waterfill(l2, noise, total), std::nullopt, k, mode);
  }
  r.ebn0_db = ebn0_db;
  return r;
}

// Spectral efficiency (bits/s/Hz): unfactored capacity / (B T).
inline double spectral_efficiency(const CapacityReport& report, double bandwidth_hz,
                                  double symbol_time) {
  detail::require(bandwidth_hz > 0.0, "spectral_efficiency: bandwidth must be positive");
  detail::require(symbol_time > 0.0, "spectral_efficiency: symbol time must be positive");
  return report.unfactored_bits / (bandwidth_hz * symbol_time);
}

// Singular values of the L_t = K channel matrix of a pulse, the K
// subchannels of one symbol.
inline std::vector<double> symbol_subchannels(const PulseShape& pulse, SvdOptions options = {}) {
  const auto h = build_channel_matrix(pulse, pulse.samples_per_symbol());
  return singular_spectrum(h, options).values;
}

// Eb/N0 (dB) at which the capacity reaches target_bits, by bisection to
// 1e-6 dB. A non-positive target has no finite answer and is rejected.
inline double required_ebn0(std::span<const double> singular_values, std::size_t k, double eta,
                            double target_bits, CapacityMode mode) {
  detail::require(target_bits > 0.0,
                  "required_ebn0: target must be positive (a zero target needs Eb/N0 -> -inf dB)");
  detail::require(k >= 1, "required_ebn0: K must be >= 1");
  const double ts = 1.0 / static_cast<double>(k);
  auto cap = [&](double db) {
    return capacity_ebn0(singular_values, eta, ts, db, mode).total_bits_per_symbol;
  };

  double lo = -50.0;
  double hi = 50.0;
  int expansions = 0;
  while (cap(hi) < target_bits) {
    lo = hi;
    hi += 50.0;
    if (++expansions > 40)
      throw NumericalError("required_ebn0: no bracket up to " + std::to_string(hi) + " dB");
  }
  while (cap(lo) >= target_bits) {
    hi = lo;
    lo -= 50.0;
    if (++expansions > 40)
      throw NumericalError("required_ebn0: no bracket down to " + std::to_string(lo) + " dB");
  }
  while (hi - lo > 1e-7) {
    const double mid = 0.5 * (lo + hi);
    (cap(mid) < target_bits ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double required_ebn0(std::size_t k, const PulseShape& pulse, double eta,
                            double target_bits, CapacityMode mode) {
  detail::require(pulse.samples_per_symbol() == k, "required_ebn0: pulse length must equal K");
  const auto lambda = symbol_subchannels(pulse);
  return required_ebn0(lambda, k, eta, target_bits, mode);
}

}  // namespace metamux
