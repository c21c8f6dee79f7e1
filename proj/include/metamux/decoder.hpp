#pragma once

// Sequence detection for the overlapped stream: Viterbi MLSD over the ISI
// trellis, a sequential importance resampling (SIR) particle decoder, and the
// joint decoder used when a known QAM signal shares the band.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "metamux/alphabet.hpp"
#include "metamux/channel.hpp"
#include "metamux/error.hpp"
#include "metamux/random.hpp"
#include "metamux/waveform.hpp"

namespace metamux {

struct DecodeDiagnostics {
  std::string decoder;
  std::size_t states = 0;          // Viterbi
  std::size_t particles = 0;       // SMC
  std::size_t lag = 0;             // SMC
  std::size_t resample_count = 0;  // SMC
  double min_effective_particles = std::numeric_limits<double>::quiet_NaN();
  std::size_t underflow_resets = 0;
};

struct DecodeResult {
  std::vector<std::uint8_t> bits;
  std::vector<SymbolIndex> symbols;
  std::vector<double> confidence;  // SMC only: posterior mass of the chosen symbol
  DecodeDiagnostics diagnostics;
};

namespace detail {

inline std::size_t frame_symbols_of(std::span<const cd> samples, std::size_t k) {
  detail::require(samples.size() >= k, "decode: fewer samples than one pulse (need L_t + K - 1)");
  return samples.size() - k + 1;
}

inline void finish_result(DecodeResult& r, const Alphabet& alphabet) {
  r.bits = indices_to_bits(r.symbols, alphabet);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Viterbi

struct ViterbiConfig {
  std::size_t state_limit = std::size_t{1} << 20;
};

inline std::size_t trellis_states(std::size_t alphabet_size, std::size_t k) {
  std::size_t s = 1;
  for (std::size_t i = 1; i < k; ++i) {
    if (s > std::numeric_limits<std::size_t>::max() / alphabet_size) return std::numeric_limits<std::size_t>::max();
    s *= alphabet_size;
  }
  return s;
}

// Maximum likelihood sequence over the full trellis. The state holds the
// last K-1 symbols as base-|A| digits, most recent in the lowest digit.
// Positions before the frame and the K-1 flush positions after it carry no
// symbol, so the trellis starts and ends in state 0.
inline DecodeResult viterbi_decode(std::span<const cd> samples, const PulseShape& pulse,
                                   const Alphabet& alphabet, ViterbiConfig config = {}) {
  const auto taps = pulse.taps();
  const std::size_t k = taps.size();
  const std::size_t lt = detail::frame_symbols_of(samples, k);
  const std::size_t a = alphabet.size();
  const std::size_t states = trellis_states(a, k);
  if (states > config.state_limit)
    throw ConfigError("viterbi_decode: " + std::to_string(a) + "^" + std::to_string(k - 1) +
                      " states exceed the limit of " + std::to_string(config.state_limit) +
                      "; use the SMC decoder");

  DecodeResult r;
  r.diagnostics.decoder = "viterbi";
  r.diagnostics.states = states;
  r.symbols.resize(lt);

  if (k == 1) {
    detail::require(taps[0] != 0.0, "viterbi_decode: zero pulse");
    for (std::size_t t = 0; t < lt; ++t) r.symbols[t] = alphabet.nearest(samples[t] / taps[0]);
    detail::finish_result(r, alphabet);
    return r;
  }

  const std::size_t top = states / a;  // A^(K-2)
  const std::size_t steps = samples.size();
  const auto pts = alphabet.points();
  constexpr double inf = std::numeric_limits<double>::infinity();

  // Contribution of the K-1 newest symbols (the digits of the new state), and
  // of the symbol leaving the window. `edge` masks positions outside the frame.
  std::vector<cd> base(states);
  std::vector<cd> leaving(a);
  auto fill_terms = [&](std::size_t t, bool edge) {
    for (std::size_t s = 0; s < states; ++s) {
      std::size_t digits = s;
      cd acc{0.0, 0.0};
      for (std::size_t j = 0; j + 1 < k; ++j) {
        const std::size_t d = digits % a;
        digits /= a;
        const bool valid = !edge || (t >= j && t - j < lt);
        if (valid) acc += taps[j] * pts[d];
      }
      base[s] = acc;
    }
    const bool old_valid = !edge || (t >= k - 1 && t - (k - 1) < lt);
    for (std::size_t o = 0; o < a; ++o) leaving[o] = old_valid ? taps[k - 1] * pts[o] : cd{0.0, 0.0};
  };

  std::vector<double> metric(states, inf);
  std::vector<double> next(states);
  std::vector<std::uint8_t> decisions(steps * states, 0);
  metric[0] = 0.0;

  bool middle_ready = false;
  for (std::size_t t = 0; t < steps; ++t) {
    const bool edge = t < k - 1 || t >= lt;
    if (edge) {
      fill_terms(t, true);
      middle_ready = false;
    } else if (!middle_ready) {
      fill_terms(t, false);
      middle_ready = true;
    }
    const cd y = samples[t];
    std::uint8_t* dec = decisions.data() + t * states;
    for (std::size_t s = 0; s < states; ++s) {
      if (t >= lt && s % a != 0) {
        next[s] = inf;
        continue;
      }
      const std::size_t prev_base = s / a;
      double best = inf;
      std::size_t best_o = 0;
      for (std::size_t o = 0; o < a; ++o) {
        const double m = metric[prev_base + o * top];
        if (m == inf) continue;
        const double cand = m + std::norm(y - base[s] - leaving[o]);
        if (cand < best) {
          best = cand;
          best_o = o;
        }
      }
      next[s] = best;
      dec[s] = static_cast<std::uint8_t>(best_o);
    }
    metric.swap(next);
  }

  std::size_t state = static_cast<std::size_t>(std::min_element(metric.begin(), metric.end()) - metric.begin());
  if (metric[state] == inf) throw NumericalError("viterbi_decode: no surviving path");
  for (std::size_t t = steps; t-- > 0;) {
    if (t < lt) r.symbols[t] = static_cast<SymbolIndex>(state % a);
    state = state / a + decisions[t * states + state] * top;
  }
  detail::finish_result(r, alphabet);
  return r;
}

// ---------------------------------------------------------------------------
// Particle machinery

struct SmcConfig {
  std::size_t particles = 2000;
  double resample_threshold = 0.5;  // resample when N_eff < threshold * M
  std::size_t lag = 0;              // fixed-lag delay; 0 selects 2K
  bool allow_degenerate = false;    // permit M = 1 (diagnostics only)

  bool operator==(const SmcConfig&) const = default;

  std::size_t effective_lag(std::size_t k) const { return lag ? lag : 2 * k; }

  void validate() const {
    detail::require(particles >= 1, "smc: particle count must be >= 1");
    detail::require(particles >= 2 || allow_degenerate,
                    "smc: particle count must be >= 2 (M = 1 needs allow_degenerate)");
    detail::require(resample_threshold > 0.0 && resample_threshold <= 1.0,
                    "smc: resample threshold must lie in (0, 1]");
  }
};

inline constexpr double kNormalizationTolerance = 1e-9;

// N_eff = 1 / sum w_i^2 for normalized weights.
inline double effective_particle_count(std::span<const double> weights) {
  detail::require(!weights.empty(), "effective_particle_count: no weights");
  double sum = 0.0;
  double sq = 0.0;
  for (double w : weights) {
    detail::require(w >= 0.0 && std::isfinite(w), "effective_particle_count: negative or non-finite weight");
    sum += w;
    sq += w * w;
  }
  detail::require(std::abs(sum - 1.0) < kNormalizationTolerance,
                  "effective_particle_count: weights are not normalized");
  return 1.0 / sq;
}

// Ancestor indices by systematic resampling with offset u0 in [0, 1/M).
inline std::vector<std::size_t> systematic_ancestors(std::span<const double> weights, double u0,
                                                     std::size_t count = 0) {
  const std::size_t n = weights.size();
  const std::size_t m = count ? count : n;
  detail::require(n > 0, "systematic_resample: no weights");
  std::vector<std::size_t> out(m);
  const double step = 1.0 / static_cast<double>(m);
  double cumulative = weights[0];
  std::size_t i = 0;
  for (std::size_t j = 0; j < m; ++j) {
    const double u = u0 + static_cast<double>(j) * step;
    while (u >= cumulative && i + 1 < n) cumulative += weights[++i];
    out[j] = i;
  }
  return out;
}

inline double unit_uniform(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// M symbol histories with normalized weights. Each history is a ring of
// width W stored twice, so any window of up to W consecutive positions is
// contiguous.
class ParticleEnsemble {
 public:
  ParticleEnsemble(std::size_t particles, std::size_t width, SymbolIndex fill)
      : m_(particles), w_(width), hist_(particles * 2 * width, fill),
        weights_(particles, 1.0 / static_cast<double>(particles)) {
    detail::require(particles >= 1 && width >= 1, "particle ensemble: empty");
  }

  std::size_t size() const noexcept { return m_; }
  std::size_t width() const noexcept { return w_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<double> weights() noexcept { return weights_; }

  SymbolIndex* history(std::size_t i) noexcept { return hist_.data() + i * 2 * w_; }
  const SymbolIndex* history(std::size_t i) const noexcept { return hist_.data() + i * 2 * w_; }

  SymbolIndex at(std::size_t i, std::size_t position) const { return history(i)[position % w_]; }
  void set(std::size_t i, std::size_t position, SymbolIndex s) {
    SymbolIndex* h = history(i);
    h[position % w_] = s;
    h[position % w_ + w_] = s;
  }

  double effective_count() const { return effective_particle_count(weights_); }

  // Replace every particle by its ancestor; weights become uniform.
  void reassign(std::span<const std::size_t> ancestors) {
    std::vector<SymbolIndex> fresh(hist_.size());
    for (std::size_t j = 0; j < m_; ++j)
      std::memcpy(fresh.data() + j * 2 * w_, history(ancestors[j]), 2 * w_ * sizeof(SymbolIndex));
    hist_.swap(fresh);
    std::fill(weights_.begin(), weights_.end(), 1.0 / static_cast<double>(m_));
  }

 private:
  std::size_t m_;
  std::size_t w_;
  std::vector<SymbolIndex> hist_;
  std::vector<double> weights_;
};

inline ParticleEnsemble systematic_resample(ParticleEnsemble ensemble, std::uint64_t seed) {
  effective_particle_count(ensemble.weights());  // validates normalization
  Rng rng(seed);
  const double u0 = unit_uniform(rng) / static_cast<double>(ensemble.size());
  const auto anc = systematic_ancestors(ensemble.weights(), u0);
  ensemble.reassign(anc);
  return ensemble;
}

// ---------------------------------------------------------------------------
// SIR decoder

inline constexpr double kNoiseVarianceFloor = 1e-12;

// Prior-proposal SIR: x_t is drawn uniformly over the alphabet, weighted by
// exp(-|y_t - s_t|^2 / sigma^2), resampled when N_eff drops below the
// threshold. Symbol x_q is decided at time q + lag by weighted majority;
// the last positions come from the highest-weight particle.
// `known_additive`, when non-empty, is a known signal added to every
// particle's predicted sample.
inline DecodeResult smc_decode(std::span<const cd> samples, const PulseShape& pulse,
                               const Alphabet& alphabet, double noise_variance,
                               const SmcConfig& config, std::uint64_t seed,
                               std::span<const cd> known_additive = {}) {
  config.validate();
  detail::require(noise_variance >= 0.0 && std::isfinite(noise_variance),
                  "smc_decode: noise variance must be finite and >= 0");
  const auto taps = pulse.taps();
  const std::size_t k = taps.size();
  const std::size_t lt = detail::frame_symbols_of(samples, k);
  detail::require(known_additive.empty() || known_additive.size() == samples.size(),
                  "smc_decode: known additive signal length differs from samples");

  const std::size_t m = config.particles;
  const std::size_t a = alphabet.size();
  const std::size_t lag = config.effective_lag(k);
  const std::size_t width = std::max(lag, k) + 1;
  const auto sentinel = static_cast<SymbolIndex>(a);
  const double inv_var = 1.0 / std::max(noise_variance, kNoiseVarianceFloor);
  const unsigned eta = alphabet.bits_per_symbol();

  std::vector<cd> amp(a + 1, cd{0.0, 0.0});
  for (std::size_t i = 0; i < a; ++i) amp[i] = alphabet[i];
  std::vector<double> rtaps(taps.rbegin(), taps.rend());

  ParticleEnsemble ens(m, width, sentinel);
  std::vector<double> logw(m, 0.0);
  std::vector<double> symbol_mass(a);
  Rng rng(seed);

  DecodeResult r;
  r.diagnostics.decoder = "smc";
  r.diagnostics.particles = m;
  r.diagnostics.lag = lag;
  r.diagnostics.min_effective_particles = static_cast<double>(m);
  r.symbols.assign(lt, 0);
  r.confidence.assign(lt, 0.0);

  std::uint64_t word = 0;
  unsigned bits_left = 0;
  auto draw = [&]() -> SymbolIndex {
    if (bits_left < eta) {
      word = rng();
      bits_left = 64;
    }
    const auto s = static_cast<SymbolIndex>(word & ((std::uint64_t{1} << eta) - 1));
    word >>= eta;
    bits_left -= eta;
    return s;
  };

  auto decide = [&](std::size_t q) {
    std::fill(symbol_mass.begin(), symbol_mass.end(), 0.0);
    const auto w = ens.weights();
    for (std::size_t i = 0; i < m; ++i) {
      const SymbolIndex s = ens.at(i, q);
      if (s < a) symbol_mass[s] += w[i];
    }
    const auto best = std::max_element(symbol_mass.begin(), symbol_mass.end()) - symbol_mass.begin();
    r.symbols[q] = static_cast<SymbolIndex>(best);
    r.confidence[q] = symbol_mass[static_cast<std::size_t>(best)];
  };

  const std::size_t steps = samples.size();
  for (std::size_t t = 0; t < steps; ++t) {
    const std::size_t slot = t % width;
    const std::size_t start = (t + width - (k - 1)) % width;
    const cd y = samples[t];
    const cd extra = known_additive.empty() ? cd{0.0, 0.0} : known_additive[t];
    double max_log = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      SymbolIndex* h = ens.history(i);
      const SymbolIndex s = t < lt ? draw() : sentinel;
      h[slot] = s;
      h[slot + width] = s;
      const SymbolIndex* win = h + start;
      cd pred = extra;
      for (std::size_t j = 0; j < k; ++j) pred += rtaps[j] * amp[win[j]];
      logw[i] -= std::norm(y - pred) * inv_var;
      max_log = std::max(max_log, logw[i]);
    }

    auto w = ens.weights();
    double total = 0.0;
    if (std::isfinite(max_log)) {
      for (std::size_t i = 0; i < m; ++i) {
        logw[i] -= max_log;
        w[i] = std::exp(logw[i]);
        total += w[i];
      }
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
      ++r.diagnostics.underflow_resets;
      std::fill(logw.begin(), logw.end(), 0.0);
      std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(m));
    } else {
      for (auto& x : w) x /= total;
    }

    double neff = 0.0;
    for (double x : w) neff += x * x;
    neff = 1.0 / neff;
    r.diagnostics.min_effective_particles = std::min(r.diagnostics.min_effective_particles, neff);

    if (t >= lag && t - lag < lt) decide(t - lag);

    if (t + 1 == steps) {
      const std::size_t first_tail = steps > lag ? steps - lag : 0;
      const auto best = static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
      for (std::size_t q = first_tail; q < lt; ++q) {
        const SymbolIndex s = ens.at(best, q);
        r.symbols[q] = s;
        double mass = 0.0;
        for (std::size_t i = 0; i < m; ++i)
          if (ens.at(i, q) == s) mass += w[i];
        r.confidence[q] = mass;
      }
    } else if (neff < config.resample_threshold * static_cast<double>(m)) {
      const double u0 = unit_uniform(rng) / static_cast<double>(m);
      ens.reassign(systematic_ancestors(ens.weights(), u0));
      std::fill(logw.begin(), logw.end(), 0.0);
      ++r.diagnostics.resample_count;
    }
  }
  detail::finish_result(r, alphabet);
  return r;
}

// ---------------------------------------------------------------------------
// Joint decoding under cooperative spectrum sharing

struct JointDecodeResult {
  DecodeResult meta;
  std::vector<std::uint8_t> qam_bits;
  double qam_unreliable_fraction = 0.0;
  bool qam_degraded = false;  // more than kQamFailureLimit of slices unreliable
};

inline constexpr double kQamFailureLimit = 0.10;

// Coherently demodulate the QAM signal, regenerate its waveform from the
// sliced bits, then run the particle decoder with the regenerated waveform
// added to every particle's prediction. `qam_symbols` is the number of QAM
// symbols carried by the block (0 selects the layout maximum).
inline JointDecodeResult joint_decode(std::span<const cd> samples, const PulseShape& pulse,
                                      const Alphabet& alphabet, double noise_variance,
                                      const InterfererParams& interferer,
                                      const SmcConfig& config, std::uint64_t seed,
                                      std::size_t qam_symbols = 0) {
  JointDecodeResult out;
  const double g = interferer.amplitude();
  if (g == 0.0) {
    out.meta = smc_decode(samples, pulse, alphabet, noise_variance, config, seed);
    return out;
  }
  const std::size_t count = qam_symbols ? qam_symbols : qam_layout(interferer, samples.size()).count;
  auto demod = demodulate_qam(samples, interferer, count);
  out.qam_unreliable_fraction = demod.unreliable_fraction;
  out.qam_degraded = demod.unreliable_fraction > kQamFailureLimit;
  auto regenerated = make_qam_interferer(interferer, demod.bits, samples.size());
  for (auto& v : regenerated) v *= g;
  out.qam_bits = std::move(demod.bits);
  out.meta = smc_decode(samples, pulse, alphabet, noise_variance, config, seed, regenerated);
  return out;
}

}  // namespace metamux
