#pragma once

// Reproducible experiments: capacity sweeps, BER waterfalls, spectrum
// reports and the spectrum-sharing comparison. Every stochastic quantity is
// seeded from (master seed, grid point, frame, stream), so results do not
// depend on thread count or scheduling.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "metamux/alphabet.hpp"
#include "metamux/capacity.hpp"
#include "metamux/channel.hpp"
#include "metamux/config.hpp"
#include "metamux/decoder.hpp"
#include "metamux/mux.hpp"
#include "metamux/random.hpp"
#include "metamux/spectrum.hpp"
#include "metamux/waveform.hpp"

namespace metamux {

namespace detail {

// Runs fn(i) for i in [0, n) on up to `threads` workers. The first
// exception is rethrown after all workers finish.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1U, threads), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
  if (!out) throw ConfigError("write failed: " + path.string());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Capacity sweep

struct CapacityRecord {
  std::size_t k = 0;
  double ebn0_db = 0.0;
  CapacityMode mode = CapacityMode::Waterfill;
  double bits_per_symbol = 0.0;
  double spectral_efficiency = 0.0;
  std::string waveform;
};

struct RequiredEbn0Record {
  std::size_t k = 0;
  CapacityMode mode = CapacityMode::Waterfill;
  double target_bits = 0.0;
  double required_ebn0_db = 0.0;
  std::string waveform;
};

struct CapacitySweep {
  std::vector<CapacityRecord> curve;
  std::vector<RequiredEbn0Record> required;
};

inline void write_capacity_csv(std::ostream& out, const std::vector<CapacityRecord>& rows) {
  out << "k,ebn0_db,mode,c_bits_per_symbol,eta_bits_s_hz,waveform\n";
  for (const auto& r : rows) {
    out << r.k << ',' << detail::fmt_double(r.ebn0_db) << ',' << to_string(r.mode) << ','
        << detail::fmt_double(r.bits_per_symbol) << ',' << detail::fmt_double(r.spectral_efficiency) << ','
        << r.waveform << '\n';
  }
}

inline void write_required_csv(std::ostream& out, const std::vector<RequiredEbn0Record>& rows) {
  out << "k,mode,target_bits,required_ebn0_db,waveform\n";
  for (const auto& r : rows) {
    out << r.k << ',' << to_string(r.mode) << ',' << detail::fmt_double(r.target_bits) << ','
        << detail::fmt_double(r.required_ebn0_db) << ',' << r.waveform << '\n';
  }
}

// For each K: capacity (both modes) on the Eb/N0 grid, and the Eb/N0 needed
// for the target capacity (2K bits by default). Spectral efficiency uses the
// 35 dB bounded-PSD bandwidth of the pulse.
inline CapacitySweep run_capacity_sweep(const ExperimentConfig& config) {
  config.validate();
  const double eta = Alphabet::parse(config.alphabet).bits_per_symbol();
  const auto& ks = config.capacity.k_list;
  std::vector<CapacitySweep> per_k(ks.size());
  detail::parallel_for(ks.size(), config.threads, [&](std::size_t i) {
    const std::size_t k = ks[i];
    const auto pulse = config.waveform.make(static_cast<long>(k), config.symbol_time);
    const auto lambda = symbol_subchannels(pulse);
    const double bandwidth = occupied_bandwidth(pulse, 35.0, config.spectrum.pad_factor);
    const std::string name = config.waveform.name();
    auto& slot = per_k[i];
    for (auto mode : {CapacityMode::Waterfill, CapacityMode::EqualPower}) {
      for (double e : config.ebn0_db) {
        const auto rep = capacity_ebn0(lambda, eta, 1.0 / static_cast<double>(k), e, mode);
        slot.curve.push_back({k, e, mode, rep.total_bits_per_symbol,
                              spectral_efficiency(rep, bandwidth, config.symbol_time), name});
      }
      const double target = config.capacity.target_bits > 0.0 ? config.capacity.target_bits : 2.0 * k;
      slot.required.push_back({k, mode, target, required_ebn0(lambda, k, eta, target, mode), name});
    }
  });
  CapacitySweep out;
  for (auto& s : per_k) {
    out.curve.insert(out.curve.end(), s.curve.begin(), s.curve.end());
    out.required.insert(out.required.end(), s.required.begin(), s.required.end());
  }
  return out;
}

inline void save_capacity_sweep(const CapacitySweep& sweep, const std::filesystem::path& dir) {
  auto a = detail::open_output(dir / "capacity.csv");
  write_capacity_csv(a, sweep.curve);
  auto b = detail::open_output(dir / "required_ebn0.csv");
  write_required_csv(b, sweep.required);
}

// ---------------------------------------------------------------------------
// BER sweep

struct BerRecord {
  double ebn0_db = 0.0;
  std::size_t k = 0;
  std::string waveform;
  std::string decoder;
  std::size_t bits_sent = 0;
  std::size_t bit_errors = 0;
  double ber = 0.0;
  std::size_t frames = 0;
  std::optional<double> runtime_s;  // only with timing enabled
  std::uint64_t seed = 0;
};

inline void write_ber_header(std::ostream& out, bool timing) {
  out << "ebn0_db,k,waveform,decoder,bits_sent,bit_errors,ber,frames,seed";
  if (timing) out << ",runtime_s";
  out << '\n';
}

inline void write_ber_row(std::ostream& out, const BerRecord& r, bool timing) {
  out << detail::fmt_double(r.ebn0_db) << ',' << r.k << ',' << r.waveform << ',' << r.decoder << ','
      << r.bits_sent << ',' << r.bit_errors << ',' << detail::fmt_double(r.ber) << ',' << r.frames << ','
      << r.seed;
  if (timing) out << ',' << detail::fmt_double(r.runtime_s.value_or(0.0));
  out << '\n';
}

// Append-only CSV: each record is written and flushed as soon as it is final.
class BerCsvWriter {
 public:
  BerCsvWriter(std::ostream* out, bool timing) : out_(out), timing_(timing) {
    if (out_) {
      write_ber_header(*out_, timing_);
      out_->flush();
    }
  }
  void append(const BerRecord& r) {
    if (!out_) return;
    write_ber_row(*out_, r, timing_);
    out_->flush();
    if (!*out_) throw ConfigError("BER CSV: write failed");
  }

 private:
  std::ostream* out_;
  bool timing_;
};

inline DecoderChoice resolve_decoder(const ExperimentConfig& c, std::size_t alphabet_size) {
  if (c.decoder != DecoderChoice::Auto) return c.decoder;
  return trellis_states(alphabet_size, c.k) <= 4096 ? DecoderChoice::Viterbi : DecoderChoice::Smc;
}

struct FrameOutcome {
  std::size_t bits = 0;
  std::size_t errors = 0;
};

// Frame f of grid point p: bits, noise and decoder randomness all derive
// from (seed, p, f).
inline FrameOutcome run_ber_frame(const ExperimentConfig& c, const PulseShape& pulse,
                                  const Alphabet& alphabet, DecoderChoice decoder, std::size_t point,
                                  std::size_t frame, double ebn0_db) {
  const std::size_t lt = c.effective_frame_symbols();
  const auto bits = random_bits(lt * alphabet.bits_per_symbol(), derive_seed(c.seed, point, frame, SeedStream::Bits));
  const auto f = make_frame(bits, pulse, alphabet);
  const auto cal = calibrate_noise(f.samples, alphabet.bits_per_symbol(), c.k, ebn0_db);
  const auto noisy = awgn(f.samples, cal.noise_variance, derive_seed(c.seed, point, frame, SeedStream::Noise));
  DecodeResult r;
  if (decoder == DecoderChoice::Viterbi) {
    r = viterbi_decode(noisy, pulse, alphabet);
  } else {
    r = smc_decode(noisy, pulse, alphabet, cal.noise_variance, c.smc,
                   derive_seed(c.seed, point, frame, SeedStream::Decoder));
  }
  return {bits.size(), count_bit_errors(bits, r.bits)};
}

// Frames run in parallel batches; results are accumulated in frame order
// and the stop rule (min_errors reached or bit budget spent) is applied per
// frame, so the outcome is independent of the thread count.
template <class FrameFn, class Accept>
std::size_t run_frames_until(unsigned threads, FrameFn&& frame_fn, Accept&& accept) {
  const std::size_t batch = std::max(1U, threads);
  std::size_t frame = 0;
  while (true) {
    using Outcome = decltype(frame_fn(std::size_t{0}));
    std::vector<Outcome> results(batch);
    detail::parallel_for(batch, threads, [&](std::size_t i) { results[i] = frame_fn(frame + i); });
    for (std::size_t i = 0; i < batch; ++i) {
      if (!accept(results[i])) return frame + i + 1;
    }
    frame += batch;
  }
}

inline std::vector<BerRecord> run_ber_sweep(const ExperimentConfig& config, std::ostream* csv = nullptr) {
  config.validate();
  const auto alphabet = Alphabet::parse(config.alphabet);
  const auto pulse = config.waveform.make(static_cast<long>(config.k), config.symbol_time);
  const auto decoder = resolve_decoder(config, alphabet.size());
  if (decoder == DecoderChoice::Viterbi && trellis_states(alphabet.size(), config.k) > ViterbiConfig{}.state_limit)
    throw ConfigError("decoder: Viterbi is infeasible for K = " + std::to_string(config.k) + "; use smc");

  BerCsvWriter writer(csv, config.timing);
  std::vector<BerRecord> records;
  for (std::size_t p = 0; p < config.ebn0_db.size(); ++p) {
    const auto start = std::chrono::steady_clock::now();
    BerRecord rec;
    rec.ebn0_db = config.ebn0_db[p];
    rec.k = config.k;
    rec.waveform = config.waveform.name();
    rec.decoder = to_string(decoder);
    rec.seed = config.seed;
    rec.frames = run_frames_until(
        config.threads,
        [&](std::size_t f) { return run_ber_frame(config, pulse, alphabet, decoder, p, f, rec.ebn0_db); },
        [&](const FrameOutcome& o) {
          rec.bits_sent += o.bits;
          rec.bit_errors += o.errors;
          const bool enough_errors = config.min_errors > 0 && rec.bit_errors >= config.min_errors;
          return !(enough_errors || rec.bits_sent >= config.bits);
        });
    rec.ber = static_cast<double>(rec.bit_errors) / static_cast<double>(rec.bits_sent);
    if (config.timing)
      rec.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    writer.append(rec);
    records.push_back(rec);
  }
  return records;
}

// ---------------------------------------------------------------------------
// Spectrum report

struct SpectrumReport {
  SpectrumEstimate pulse_spectrum;
  BandwidthReport pulse_bandwidth;
  std::optional<SpectrumEstimate> signal_spectrum;
  std::optional<BandwidthReport> signal_bandwidth;
};

inline nlohmann::json to_json(const BandwidthReport& r) {
  nlohmann::json j;
  const double rs = r.symbol_rate;
  j["processing_bandwidth_hz"] = r.processing_bandwidth_hz;
  j["processing_bandwidth_t"] = r.processing_bandwidth_hz / rs;
  j["resolution_hz"] = r.resolution;
  nlohmann::json b = nlohmann::json::object();
  for (const auto& [level, bw] : r.bounded_psd) {
    const std::string key = detail::fmt_double(level);
    if (bw.within_grid) {
      b[key] = {{"hz", bw.hz}, {"t", bw.hz / rs}};
    } else {
      b[key] = {{"exceeds_grid", true}, {"grid_hz", r.processing_bandwidth_hz}};
    }
  }
  j["bounded_psd"] = b;
  nlohmann::json f = nlohmann::json::object();
  for (const auto& [frac, hz] : r.fpcb) f[detail::fmt_double(frac)] = {{"hz", hz}, {"t", hz / rs}};
  j["fpcb"] = f;
  return j;
}

inline SpectrumReport run_spectrum_report(const ExperimentConfig& config) {
  config.validate();
  const auto pulse = config.waveform.make(static_cast<long>(config.k), config.symbol_time);
  SpectrumReport r;
  r.pulse_spectrum = magnitude_spectrum(pulse, config.spectrum.pad_factor);
  r.pulse_bandwidth = bandwidth_report(r.pulse_spectrum, config.spectrum.levels_db, config.spectrum.fractions);
  if (config.spectrum.welch_symbols > 0) {
    // Streamed in blocks; overlap-add keeps the output equal to one long encode.
    const auto alphabet = Alphabet::parse(config.alphabet);
    const std::size_t total = config.spectrum.welch_symbols;
    const std::size_t block = std::size_t{1} << 16;
    detail::require(total + config.k - 1 >= 2 * config.spectrum.welch_segment,
                    "spectrum.welch_symbols: signal shorter than two Welch segments");
    WelchAccumulator acc(config.spectrum.welch_segment, 0.5, pulse.sample_rate(), 1.0 / pulse.symbol_time());
    std::vector<cd> carry;
    for (std::size_t done = 0, b = 0; done < total; done += block, ++b) {
      const std::size_t count = std::min(block, total - done);
      const auto bits = random_bits(count * alphabet.bits_per_symbol(), derive_seed(config.seed, 0, b, SeedStream::Bits));
      auto s = make_frame(bits, pulse, alphabet).samples;
      for (std::size_t i = 0; i < carry.size(); ++i) s[i] += carry[i];
      const bool last = done + count >= total;
      const std::size_t emit = last ? s.size() : count;
      carry.assign(s.begin() + static_cast<std::ptrdiff_t>(emit), s.end());
      acc.push(std::span<const cd>(s).first(emit));
    }
    r.signal_spectrum = acc.finish();
    r.signal_bandwidth = bandwidth_report(*r.signal_spectrum, config.spectrum.levels_db, config.spectrum.fractions);
  }
  return r;
}

inline void write_spectrum_with_header(std::ostream& out, const SpectrumEstimate& s, const ExperimentConfig& c) {
  out << "# waveform=" << c.waveform.name() << " k=" << c.k << " symbol_time=" << detail::fmt_double(c.symbol_time)
      << '\n';
  out << "# processing_bandwidth_hz=" << detail::fmt_double(s.sample_rate)
      << " resolution_hz=" << detail::fmt_double(s.resolution)
      << " source=" << (s.source == SpectrumSource::Welch ? "welch" : "dft") << '\n';
  write_spectrum_csv(out, s);
}

inline void save_spectrum_report(const SpectrumReport& r, const ExperimentConfig& c,
                                 const std::filesystem::path& dir) {
  const auto pulse = c.waveform.make(static_cast<long>(c.k), c.symbol_time);
  {
    auto out = detail::open_output(dir / "taps.csv");
    write_taps_csv(out, pulse);
  }
  {
    auto out = detail::open_output(dir / "pulse_spectrum.csv");
    write_spectrum_with_header(out, r.pulse_spectrum, c);
  }
  nlohmann::json j;
  j["waveform"] = c.waveform.name();
  j["k"] = c.k;
  j["symbol_time"] = c.symbol_time;
  j["pulse"] = to_json(r.pulse_bandwidth);
  if (r.signal_spectrum) {
    auto out = detail::open_output(dir / "signal_spectrum.csv");
    write_spectrum_with_header(out, *r.signal_spectrum, c);
    j["signal"] = to_json(*r.signal_bandwidth);
    j["signal"]["symbols"] = c.spectrum.welch_symbols;
  }
  detail::write_json(dir / "bandwidth.json", j);
}

// ---------------------------------------------------------------------------
// Spectrum sharing

struct SharingPoint {
  BerRecord baseline;  // no interferer
  BerRecord joint;     // interferer present, joint decoder
  BerRecord naive;     // interferer present, ignored by the decoder
  std::size_t qam_bits = 0;
  std::size_t qam_errors = 0;
  std::size_t degraded_frames = 0;
};

struct PenaltyReport {
  double target_ber = 1e-3;
  std::optional<double> baseline_db;  // Eb/N0 where the baseline reaches the target
  std::optional<double> joint_db;
  std::optional<double> penalty_db;
  std::optional<double> reference_point_db;  // lowest grid point with baseline BER < target
};

struct SharingResult {
  std::vector<SharingPoint> points;
  PenaltyReport penalty;
};

// Eb/N0 at which a BER curve first falls to `target`, by linear
// interpolation of log10(BER). Zero counts are floored at half an error.
inline std::optional<double> ber_crossing(const std::vector<BerRecord>& curve, double target) {
  auto logb = [](const BerRecord& r) {
    const double floor = 0.5 / static_cast<double>(std::max<std::size_t>(r.bits_sent, 1));
    return std::log10(std::max(r.ber, floor));
  };
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve[i].ber <= target) {
      if (i == 0) return curve[0].ebn0_db;
      const double x0 = curve[i - 1].ebn0_db, x1 = curve[i].ebn0_db;
      const double y0 = logb(curve[i - 1]), y1 = logb(curve[i]);
      const double yt = std::log10(target);
      if (!std::isfinite(x0) || !std::isfinite(x1) || y0 == y1) return x1;
      return x0 + (yt - y0) * (x1 - x0) / (y1 - y0);
    }
  }
  return std::nullopt;
}

inline PenaltyReport sharing_penalty(const std::vector<SharingPoint>& points, double target) {
  std::vector<BerRecord> base, joint;
  for (const auto& p : points) {
    base.push_back(p.baseline);
    joint.push_back(p.joint);
  }
  PenaltyReport r;
  r.target_ber = target;
  r.baseline_db = ber_crossing(base, target);
  r.joint_db = ber_crossing(joint, target);
  if (r.baseline_db && r.joint_db) r.penalty_db = *r.joint_db - *r.baseline_db;
  for (const auto& p : points)
    if (p.baseline.ber < target) {
      r.reference_point_db = p.baseline.ebn0_db;
      break;
    }
  return r;
}

inline SharingResult run_sharing_experiment(const ExperimentConfig& config, std::ostream* csv = nullptr) {
  config.validate();
  if (!config.interferer) throw ConfigError("interferer: the sharing experiment needs an interferer preset");
  const auto alphabet = Alphabet::parse(config.alphabet);
  const auto pulse = config.waveform.make(static_cast<long>(config.k), config.symbol_time);
  const auto params = config.interferer->resolve(config.sample_rate());
  const std::size_t lt = config.effective_frame_symbols();
  const std::size_t n = lt + config.k - 1;
  const auto layout = qam_layout(params, n);
  if (layout.count == 0) throw ConfigError("interferer: frame too short for one QAM symbol");
  const unsigned qam_bits_per_symbol = Alphabet::square_qam(params.order).bits_per_symbol();
  const double g = params.amplitude();

  struct Outcome {
    std::size_t bits = 0, base = 0, joint = 0, naive = 0, qam_bits = 0, qam_err = 0;
    bool degraded = false;
  };

  BerCsvWriter writer(csv, config.timing);
  SharingResult result;
  for (std::size_t p = 0; p < config.ebn0_db.size(); ++p) {
    const double e = config.ebn0_db[p];
    const auto start = std::chrono::steady_clock::now();
    SharingPoint pt;
    auto frame_fn = [&](std::size_t f) {
      Outcome o;
      const auto bits = random_bits(lt * alphabet.bits_per_symbol(), derive_seed(config.seed, p, f, SeedStream::Bits));
      const auto fr = make_frame(bits, pulse, alphabet);
      const auto cal = calibrate_noise(fr.samples, alphabet.bits_per_symbol(), config.k, e);
      const auto noise_seed = derive_seed(config.seed, p, f, SeedStream::Noise);
      const auto dec_seed = derive_seed(config.seed, p, f, SeedStream::Decoder);
      const auto qbits = random_bits(layout.count * qam_bits_per_symbol,
                                     derive_seed(config.seed, p, f, SeedStream::InterfererBits));
      const auto qam = make_qam_interferer(params, qbits, n);
      const auto clean = awgn(fr.samples, cal.noise_variance, noise_seed);
      const auto mixed = awgn(superpose(fr.samples, qam, params.power_ratio_db), cal.noise_variance, noise_seed);

      const auto base = smc_decode(clean, pulse, alphabet, cal.noise_variance, config.smc, dec_seed);
      const auto joint = joint_decode(mixed, pulse, alphabet, cal.noise_variance, params, config.smc, dec_seed,
                                      layout.count);
      const auto naive = smc_decode(mixed, pulse, alphabet, cal.noise_variance, config.smc, dec_seed);
      o.bits = bits.size();
      o.base = count_bit_errors(bits, base.bits);
      o.joint = count_bit_errors(bits, joint.meta.bits);
      o.naive = count_bit_errors(bits, naive.bits);
      if (g != 0.0) {
        o.qam_bits = qbits.size();
        o.qam_err = count_bit_errors(qbits, joint.qam_bits);
      }
      o.degraded = joint.qam_degraded;
      return o;
    };
    const std::size_t frames = run_frames_until(config.threads, frame_fn, [&](const Outcome& o) {
      pt.baseline.bits_sent += o.bits;
      pt.baseline.bit_errors += o.base;
      pt.joint.bit_errors += o.joint;
      pt.naive.bit_errors += o.naive;
      pt.qam_bits += o.qam_bits;
      pt.qam_errors += o.qam_err;
      pt.degraded_frames += o.degraded ? 1 : 0;
      const auto me = config.min_errors;
      const bool enough = me > 0 && pt.baseline.bit_errors >= me && pt.joint.bit_errors >= me &&
                          pt.naive.bit_errors >= me;
      return !(enough || pt.baseline.bits_sent >= config.bits);
    });
    std::optional<double> runtime;
    if (config.timing) runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const char* labels[] = {"baseline", "joint", "naive"};
    BerRecord* recs[] = {&pt.baseline, &pt.joint, &pt.naive};
    for (int i = 0; i < 3; ++i) {
      auto& r = *recs[i];
      r.ebn0_db = e;
      r.k = config.k;
      r.waveform = config.waveform.name();
      r.decoder = labels[i];
      r.bits_sent = pt.baseline.bits_sent;
      r.frames = frames;
      r.ber = static_cast<double>(r.bit_errors) / static_cast<double>(r.bits_sent);
      r.seed = config.seed;
      r.runtime_s = runtime;
      writer.append(r);
    }
    result.points.push_back(pt);
  }
  result.penalty = sharing_penalty(result.points, config.penalty_ber);
  return result;
}

inline nlohmann::json to_json(const SharingResult& r, const ExperimentConfig& c) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  const auto params = c.interferer->resolve(c.sample_rate());
  j["interferer"] = {{"order", params.order},
                     {"symbol_rate_hz", params.symbol_rate_hz},
                     {"offset_hz", params.carrier_offset_hz},
                     {"rolloff", params.rolloff},
                     {"power_db", detail::ebn0_json(params.power_ratio_db)},
                     {"occupied_bandwidth_hz", params.occupied_bandwidth_hz()}};
  j["target_ber"] = r.penalty.target_ber;
  j["baseline_ebn0_db"] = opt(r.penalty.baseline_db);
  j["joint_ebn0_db"] = opt(r.penalty.joint_db);
  j["penalty_db"] = opt(r.penalty.penalty_db);
  j["reference_point_db"] = opt(r.penalty.reference_point_db);
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : r.points) {
    pts.push_back({{"ebn0_db", detail::ebn0_json(p.baseline.ebn0_db)},
                   {"bits", p.baseline.bits_sent},
                   {"baseline_ber", p.baseline.ber},
                   {"joint_ber", p.joint.ber},
                   {"naive_ber", p.naive.ber},
                   {"qam_ber", p.qam_bits ? static_cast<double>(p.qam_errors) / static_cast<double>(p.qam_bits) : 0.0},
                   {"qam_degraded_frames", p.degraded_frames}});
  }
  j["points"] = pts;
  return j;
}

}  // namespace metamux
