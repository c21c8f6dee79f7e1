#pragma once

// Power spectra and occupied-bandwidth measures (bounded PSD and
// fractional power containment).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdio>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "metamux/error.hpp"
#include "metamux/waveform.hpp"

namespace metamux {

using cd = std::complex<double>;

enum class SpectrumSource { DeterministicDFT, Welch };

// Two-sided density on a DFT grid centered on 0 Hz, normalized to a 0 dB peak.
struct SpectrumEstimate {
  std::vector<double> freqs;       // Hz, strictly increasing
  std::vector<double> density_db;  // dB relative to the peak
  double resolution = 0.0;         // Hz per bin
  double sample_rate = 0.0;        // Hz; the grid spans one period of this
  double symbol_rate = 0.0;        // 1/T, for reporting in units of 1/T
  SpectrumSource source = SpectrumSource::DeterministicDFT;

  std::size_t size() const noexcept { return freqs.size(); }
};

inline constexpr double kDensityFloorDb = -400.0;

namespace detail {

// Centered grid from raw (unshifted) power bins.
inline SpectrumEstimate centered_spectrum(std::span<const double> power,
                                          double sample_rate, double symbol_rate,
                                          SpectrumSource source) {
  const std::size_t n = power.size();
  SpectrumEstimate s;
  s.resolution = sample_rate / static_cast<double>(n);
  s.sample_rate = sample_rate;
  s.symbol_rate = symbol_rate;
  s.source = source;
  s.freqs.resize(n);
  s.density_db.resize(n);

  const double peak = *std::max_element(power.begin(), power.end());
  require(peak > 0.0, "spectrum: signal has zero power");
  const std::size_t half = n / 2;
  for (std::size_t i = 0; i < n; ++i) {
    // Output bin i holds DFT bin (i - half) mod n.
    const std::size_t src = (i + n - half) % n;
    s.freqs[i] = (static_cast<double>(i) - static_cast<double>(half)) * s.resolution;
    const double rel = power[src] / peak;
    s.density_db[i] = rel > 0.0 ? std::max(10.0 * std::log10(rel), kDensityFloorDb)
                                : kDensityFloorDb;
  }
  return s;
}

inline std::size_t zero_bin(const SpectrumEstimate& s) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (std::abs(s.freqs[i]) < std::abs(s.freqs[best])) best = i;
  }
  return best;
}

}  // namespace detail

// |DFT|^2 of the zero-padded taps. Resolution is f_s / (K * pad_factor).
inline SpectrumEstimate magnitude_spectrum(const PulseShape& pulse,
                                           std::size_t pad_factor = 256) {
  detail::require(pad_factor >= 64,
                  "magnitude_spectrum: pad_factor must be >= 64 to resolve attenuation crossings");
  const auto taps = pulse.taps();
  const std::size_t n = taps.size() * pad_factor;
  std::vector<cd> padded(n, cd{0.0, 0.0});
  for (std::size_t i = 0; i < taps.size(); ++i) padded[i] = taps[i];

  Eigen::FFT<double> fft;
  std::vector<cd> freq;
  fft.fwd(freq, padded);
  std::vector<double> power(n);
  for (std::size_t i = 0; i < n; ++i) power[i] = std::norm(freq[i]);
  return detail::centered_spectrum(power, pulse.sample_rate(), 1.0 / pulse.symbol_time(),
                                   SpectrumSource::DeterministicDFT);
}

// Streaming Welch estimator: Hann window, fixed hop, averaged periodograms.
// Lets long signals be measured chunk by chunk.
class WelchAccumulator {
 public:
  WelchAccumulator(std::size_t segment_len, double overlap_fraction, double sample_rate,
                   double symbol_rate)
      : segment_len_(segment_len), sample_rate_(sample_rate), symbol_rate_(symbol_rate) {
    detail::require(segment_len >= 2, "welch: segment length must be >= 2");
    detail::require(overlap_fraction >= 0.0 && overlap_fraction < 1.0,
                    "welch: overlap fraction must lie in [0, 1)");
    detail::require(sample_rate > 0.0, "welch: sample rate must be positive");
    hop_ = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(segment_len * (1.0 - overlap_fraction))));
    window_.resize(segment_len);
    // Periodic Hann.
    for (std::size_t i = 0; i < segment_len; ++i) {
      window_[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                        static_cast<double>(segment_len));
    }
    power_.assign(segment_len, 0.0);
  }

  void push(std::span<const cd> samples) {
    pending_.insert(pending_.end(), samples.begin(), samples.end());
    std::size_t start = 0;
    while (pending_.size() - start >= segment_len_) {
      accumulate_segment(std::span<const cd>(pending_).subspan(start, segment_len_));
      start += hop_;
    }
    pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(start));
  }

  std::size_t segments() const noexcept { return segments_; }

  SpectrumEstimate finish() const {
    if (segments_ == 0) throw ConfigError("welch: signal shorter than one segment");
    return detail::centered_spectrum(power_, sample_rate_, symbol_rate_,
                                     SpectrumSource::Welch);
  }

 private:
  void accumulate_segment(std::span<const cd> seg) {
    for (std::size_t i = 0; i < segment_len_; ++i) buffer_in_[i] = seg[i] * window_[i];
    fft_.fwd(buffer_out_, buffer_in_);
    for (std::size_t i = 0; i < segment_len_; ++i) power_[i] += std::norm(buffer_out_[i]);
    ++segments_;
  }

  std::size_t segment_len_;
  std::size_t hop_ = 1;
  double sample_rate_;
  double symbol_rate_;
  std::vector<double> window_;
  std::vector<double> power_;
  std::vector<cd> pending_;
  std::vector<cd> buffer_in_ = std::vector<cd>(segment_len_);
  std::vector<cd> buffer_out_;
  std::size_t segments_ = 0;
  Eigen::FFT<double> fft_;
};

// Averaged windowed periodogram of a complex baseband signal.
inline SpectrumEstimate welch_psd(std::span<const cd> samples, std::size_t segment_len = 4096,
                                  double overlap_fraction = 0.5, double sample_rate = 1.0,
                                  double symbol_rate = 1.0) {
  detail::require(!samples.empty(), "welch_psd: empty input");
  detail::require(samples.size() >= 2 * segment_len,
                  "welch_psd: segment longer than half the signal");
  WelchAccumulator acc(segment_len, overlap_fraction, sample_rate, symbol_rate);
  acc.push(samples);
  return acc.finish();
}

// Bounded-PSD bandwidth. `within_grid` is false when the density never
// settles below the threshold inside the processing band.
struct BoundedBandwidth {
  bool within_grid = true;
  double hz = 0.0;  // 2 * outermost frequency above threshold

  double in_symbol_rates(double symbol_rate) const { return hz / symbol_rate; }
};

// Reference level is the density at f = 0. The grid is one period of a
// periodic spectrum, so the band is trusted only if the sub-threshold gap
// around the alias point (f_s - 2 f_out) spans at least `edge_guard`
// symbol rates.
inline BoundedBandwidth bounded_psd_bandwidth(const SpectrumEstimate& spec,
                                              double attenuation_db,
                                              double edge_guard = 0.5) {
  detail::require(attenuation_db > 0.0, "bounded_psd_bandwidth: attenuation must be positive");
  detail::require(spec.size() >= 2, "bounded_psd_bandwidth: empty spectrum");
  const double reference = spec.density_db[detail::zero_bin(spec)];
  const double threshold = reference - attenuation_db;

  double outermost = 0.0;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (spec.density_db[i] > threshold) outermost = std::max(outermost, std::abs(spec.freqs[i]));
  }
  BoundedBandwidth out;
  out.hz = 2.0 * outermost;
  const double gap = spec.sample_rate - 2.0 * outermost;
  const double guard = edge_guard * (spec.symbol_rate > 0.0 ? spec.symbol_rate : spec.resolution);
  out.within_grid = gap >= guard;
  return out;
}

// Smallest symmetric band about 0 holding at least `fraction` of the grid power.
inline double fpcb_bandwidth(const SpectrumEstimate& spec, double fraction) {
  detail::require(fraction > 0.0 && fraction < 1.0, "fpcb_bandwidth: fraction must lie in (0, 1)");
  detail::require(spec.size() >= 2, "fpcb_bandwidth: empty spectrum");
  // Group bins by |f|, keyed on the integer bin offset to avoid float ties.
  std::map<long, double> by_offset;
  double total = 0.0;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const double p = std::pow(10.0, spec.density_db[i] / 10.0);
    const long offset = std::lround(std::abs(spec.freqs[i]) / spec.resolution);
    by_offset[offset] += p;
    total += p;
  }
  double acc = 0.0;
  for (const auto& [offset, p] : by_offset) {
    acc += p;
    if (acc >= fraction * total) return 2.0 * static_cast<double>(offset) * spec.resolution;
  }
  throw NumericalError("fpcb_bandwidth: fraction unreachable on the grid");
}

struct BandwidthReport {
  std::map<double, BoundedBandwidth> bounded_psd;  // keyed by attenuation (dB)
  std::map<double, double> fpcb;                   // keyed by power fraction
  double processing_bandwidth_hz = 0.0;            // K / T
  double symbol_rate = 0.0;
  double resolution = 0.0;
};

inline BandwidthReport bandwidth_report(const SpectrumEstimate& spec,
                                        std::span<const double> attenuations_db,
                                        std::span<const double> fractions) {
  BandwidthReport r;
  for (double a : attenuations_db) r.bounded_psd[a] = bounded_psd_bandwidth(spec, a);
  for (double f : fractions) r.fpcb[f] = fpcb_bandwidth(spec, f);
  r.processing_bandwidth_hz = spec.sample_rate;
  r.symbol_rate = spec.symbol_rate;
  r.resolution = spec.resolution;
  return r;
}

// Occupied bandwidth used for spectral efficiency: the bounded-PSD band at
// `attenuation_db`, or the processing bandwidth when the band is not
// resolvable inside the grid.
inline double occupied_bandwidth(const PulseShape& pulse, double attenuation_db = 35.0,
                                 std::size_t pad_factor = 256) {
  const auto spec = magnitude_spectrum(pulse, pad_factor);
  const auto b = bounded_psd_bandwidth(spec, attenuation_db);
  return b.within_grid ? b.hz : spec.sample_rate;
}

inline void write_spectrum_csv(std::ostream& out, const SpectrumEstimate& spec) {
  out << "freq_hz,density_db\n";
  char buf[96];
  for (std::size_t i = 0; i < spec.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g\n", spec.freqs[i], spec.density_db[i]);
    out << buf;
  }
}

}  // namespace metamux
