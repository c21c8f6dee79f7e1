#pragma once

// Calibrated AWGN and the spectrum-sharing QAM interferer.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "metamux/alphabet.hpp"
#include "metamux/capacity.hpp"
#include "metamux/error.hpp"
#include "metamux/random.hpp"

namespace metamux {

struct NoiseCalibration {
  double ebn0_db = 0.0;
  unsigned bits_per_symbol_total = 0;  // K * eta
  double sample_energy = 0.0;          // measured mean |s_t|^2
  double noise_variance = 0.0;         // complex, per sample
};

inline double mean_power(std::span<const cd> samples) {
  if (samples.empty()) return 0.0;
  double e = 0.0;
  for (const auto& s : samples) e += std::norm(s);
  return e / static_cast<double>(samples.size());
}

// sigma^2 = E_s K / (K eta 10^(EbN0/10)): per-sample SNR equals eta * Eb/N0.
inline NoiseCalibration calibrate_noise(std::span<const cd> samples, unsigned eta, std::size_t k,
                                        double ebn0_db) {
  detail::require(!samples.empty(), "calibrate_noise: no samples");
  detail::require(eta > 0 && k > 0, "calibrate_noise: eta and K must be positive");
  detail::require(!std::isnan(ebn0_db), "calibrate_noise: Eb/N0 is NaN");
  NoiseCalibration c;
  c.ebn0_db = ebn0_db;
  c.bits_per_symbol_total = static_cast<unsigned>(k) * eta;
  c.sample_energy = mean_power(samples);
  if (c.sample_energy <= 0.0) throw ConfigError("calibrate_noise: zero-energy signal");
  const double kd = static_cast<double>(k);
  c.noise_variance = c.sample_energy * kd / (kd * eta * db_to_linear(ebn0_db));
  return c;
}

// Adds circular complex Gaussian noise of total variance sigma_sq
// (sigma_sq / 2 per real dimension). Deterministic in the seed.
inline std::vector<cd> awgn(std::span<const cd> samples, double sigma_sq, std::uint64_t seed) {
  detail::require(sigma_sq >= 0.0, "awgn: variance must be non-negative");
  std::vector<cd> out(samples.begin(), samples.end());
  if (sigma_sq == 0.0) return out;
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(sigma_sq / 2.0));
  for (auto& s : out) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    s += cd{re, im};
  }
  return out;
}

// Eb/N0 implied by a clean/noisy pair under the calibrate_noise convention.
inline double measure_ebn0_db(std::span<const cd> clean, std::span<const cd> noisy, unsigned eta) {
  detail::require(clean.size() == noisy.size() && !clean.empty(), "measure_ebn0_db: size mismatch");
  double noise = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) noise += std::norm(noisy[i] - clean[i]);
  noise /= static_cast<double>(clean.size());
  return 10.0 * std::log10(mean_power(clean) / (eta * noise));
}

// ---------------------------------------------------------------------------
// QAM interferer

struct InterfererParams {
  unsigned order = 256;
  double symbol_rate_hz = 0.0;
  double carrier_offset_hz = 0.0;
  double sample_rate_hz = 1.0;  // the overlapped signal's sample rate, K / T
  double rolloff = 0.25;
  double power_ratio_db = 0.0;  // relative to the unit-power overlapped signal
  unsigned span_symbols = 8;    // RRC truncation, each side

  bool operator==(const InterfererParams&) const = default;

  double occupied_bandwidth_hz() const { return symbol_rate_hz * (1.0 + rolloff); }
  double samples_per_symbol() const { return sample_rate_hz / symbol_rate_hz; }
  double amplitude() const {
    return power_ratio_db == -std::numeric_limits<double>::infinity()
               ? 0.0
               : std::pow(10.0, power_ratio_db / 20.0);
  }

  // Desk layout: occupied band 0.4 f_s centered at +0.23 f_s, clear of the
  // Taylor-35 main lobe for K = 100.
  static InterfererParams desk_preset(double sample_rate_hz) {
    InterfererParams p;
    p.sample_rate_hz = sample_rate_hz;
    p.symbol_rate_hz = 0.32 * sample_rate_hz;
    p.carrier_offset_hz = 0.23 * sample_rate_hz;
    return p;
  }

  // 750 kHz of a 1 MHz processing band; overlaps the overlapped signal's
  // skirts by construction.
  static InterfererParams wide_preset(double sample_rate_hz) {
    InterfererParams p;
    p.sample_rate_hz = sample_rate_hz;
    p.symbol_rate_hz = 0.75 * sample_rate_hz / (1.0 + p.rolloff);
    p.carrier_offset_hz = 0.125 * sample_rate_hz;
    return p;
  }

  void validate() const {
    detail::require(order >= 4, "interferer: order must be >= 4");
    unsigned bits = 0;
    while ((1U << bits) < order) ++bits;
    detail::require((1U << bits) == order && bits % 2 == 0, "interferer: order must be a power of 4");
    detail::require(sample_rate_hz > 0.0 && symbol_rate_hz > 0.0,
                    "interferer: rates must be positive");
    detail::require(rolloff > 0.0 && rolloff <= 1.0, "interferer: roll-off must lie in (0, 1]");
    detail::require(span_symbols >= 1, "interferer: span must be >= 1 symbol");
    const double half = occupied_bandwidth_hz() / 2.0;
    const double edge = sample_rate_hz / 2.0 * (1.0 + 1e-12);
    detail::require(carrier_offset_hz + half <= edge && carrier_offset_hz - half >= -edge,
                    "interferer: band exceeds the processing bandwidth");
  }
};

// Root-raised-cosine with unit energy per symbol period; t in symbol periods.
inline double rrc_pulse(double t, double rolloff) {
  const double a = rolloff;
  const double pi = std::numbers::pi;
  if (std::abs(t) < 1e-12) return 1.0 - a + 4.0 * a / pi;
  if (std::abs(std::abs(t) - 1.0 / (4.0 * a)) < 1e-9) {
    return a / std::sqrt(2.0) *
           ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * a)) + (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * a)));
  }
  const double num = std::sin(pi * t * (1.0 - a)) + 4.0 * a * t * std::cos(pi * t * (1.0 + a));
  const double den = pi * t * (1.0 - 16.0 * a * a * t * t);
  return num / den;
}

// Symbol placement inside a block of n samples: symbol m sits at
// (first + m) symbol periods, with every pulse fully inside the block.
struct QamLayout {
  double first = 0.0;   // symbol periods from sample 0
  std::size_t count = 0;
};

inline QamLayout qam_layout(const InterfererParams& p, std::size_t num_samples) {
  QamLayout l;
  l.first = static_cast<double>(p.span_symbols);
  const double duration = static_cast<double>(num_samples - (num_samples ? 1 : 0)) / p.samples_per_symbol();
  const double usable = duration - 2.0 * static_cast<double>(p.span_symbols);
  l.count = usable >= 0.0 ? static_cast<std::size_t>(std::floor(usable)) + 1 : 0;
  return l;
}

// RRC-shaped QAM at the carrier offset, sampled directly at the overlapped
// signal's rate. Unit mean power (up to truncation) before the power ratio.
inline std::vector<cd> make_qam_interferer(const InterfererParams& p,
                                           std::span<const std::uint8_t> bits,
                                           std::size_t num_samples) {
  p.validate();
  const auto qam = Alphabet::square_qam(p.order);
  const auto symbols = bits_to_indices(bits, qam);
  const auto layout = qam_layout(p, num_samples);
  detail::require(symbols.size() <= layout.count, "make_qam_interferer: too many symbols for the block");

  const double sps = p.samples_per_symbol();
  const double span = static_cast<double>(p.span_symbols);
  std::vector<cd> out(num_samples, cd{0.0, 0.0});
  for (std::size_t m = 0; m < symbols.size(); ++m) {
    const double center = (layout.first + static_cast<double>(m)) * sps;  // in samples
    const auto lo = static_cast<std::size_t>(std::max(0.0, std::ceil(center - span * sps)));
    const auto hi = std::min<std::size_t>(num_samples - 1, static_cast<std::size_t>(std::floor(center + span * sps)));
    const cd a = qam[symbols[m]];
    for (std::size_t n = lo; n <= hi; ++n) out[n] += a * rrc_pulse((static_cast<double>(n) - center) / sps, p.rolloff);
  }
  const double w = 2.0 * std::numbers::pi * p.carrier_offset_hz / p.sample_rate_hz;
  for (std::size_t n = 0; n < num_samples; ++n) out[n] *= std::polar(1.0, w * static_cast<double>(n));
  return out;
}

// meta + g * interferer with g = 10^(ratio_db / 20); the shorter input is
// zero-padded. A ratio of -inf leaves meta unchanged.
inline std::vector<cd> superpose(std::span<const cd> meta, std::span<const cd> interferer,
                                 double power_ratio_db) {
  const double g = power_ratio_db == -std::numeric_limits<double>::infinity()
                       ? 0.0
                       : std::pow(10.0, power_ratio_db / 20.0);
  std::vector<cd> out(std::max(meta.size(), interferer.size()), cd{0.0, 0.0});
  std::copy(meta.begin(), meta.end(), out.begin());
  if (g != 0.0)
    for (std::size_t i = 0; i < interferer.size(); ++i) out[i] += g * interferer[i];
  return out;
}

struct QamDemodResult {
  std::vector<SymbolIndex> symbols;
  std::vector<std::uint8_t> bits;
  std::vector<cd> soft;              // matched-filter outputs, amplitude-normalized
  double unreliable_fraction = 0.0;  // decisions far from every point
};

// Coherent QAM receiver: mix to baseband, band-limit to the occupied band,
// matched-filter at each symbol instant, slice. `count` is the number of
// symbols to recover.
inline QamDemodResult demodulate_qam(std::span<const cd> samples, const InterfererParams& p,
                                     std::size_t count) {
  p.validate();
  const double g = p.amplitude();
  detail::require(g > 0.0, "demodulate_qam: interferer has zero power");
  const auto qam = Alphabet::square_qam(p.order);
  const auto layout = qam_layout(p, samples.size());
  detail::require(count <= layout.count, "demodulate_qam: more symbols than the block holds");
  const std::size_t n = samples.size();

  // Step 1: to baseband, then zero everything outside the occupied band.
  std::vector<cd> base(n);
  const double w = -2.0 * std::numbers::pi * p.carrier_offset_hz / p.sample_rate_hz;
  for (std::size_t i = 0; i < n; ++i) base[i] = samples[i] * std::polar(1.0, w * static_cast<double>(i));
  {
    Eigen::FFT<double> fft;
    std::vector<cd> spec;
    fft.fwd(spec, base);
    const double cutoff = p.occupied_bandwidth_hz() / 2.0 / p.sample_rate_hz;  // cycles/sample
    for (std::size_t i = 0; i < n; ++i) {
      double f = static_cast<double>(i) / static_cast<double>(n);
      if (f >= 0.5) f -= 1.0;
      if (std::abs(f) > cutoff * 1.02) spec[i] = 0.0;
    }
    fft.inv(base, spec);
  }

  // Step 2: matched filter at the symbol instants, then slice.
  QamDemodResult r;
  r.symbols.resize(count);
  r.soft.resize(count);
  const double sps = p.samples_per_symbol();
  const double span = static_cast<double>(p.span_symbols);
  const double half_gap = qam.min_distance() / 2.0;
  std::size_t unreliable = 0;
  for (std::size_t m = 0; m < count; ++m) {
    const double center = (layout.first + static_cast<double>(m)) * sps;
    const auto lo = static_cast<std::size_t>(std::max(0.0, std::ceil(center - span * sps)));
    const auto hi = std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::floor(center + span * sps)));
    cd acc{0.0, 0.0};
    double energy = 0.0;
    for (std::size_t i = lo; i <= hi; ++i) {
      const double h = rrc_pulse((static_cast<double>(i) - center) / sps, p.rolloff);
      acc += base[i] * h;
      energy += h * h;
    }
    const cd z = acc / (energy * g);
    r.soft[m] = z;
    r.symbols[m] = qam.nearest(z);
    if (std::abs(z - qam[r.symbols[m]]) > 0.7 * half_gap) ++unreliable;
  }
  r.bits = indices_to_bits(r.symbols, qam);
  r.unreliable_fraction = count ? static_cast<double>(unreliable) / static_cast<double>(count) : 0.0;
  return r;
}

}  // namespace metamux
