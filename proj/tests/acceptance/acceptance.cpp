#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "metamux/capacity.hpp"
#include "metamux/channel.hpp"
#include "metamux/config.hpp"
#include "metamux/decoder.hpp"
#include "metamux/experiments.hpp"
#include "metamux/mux.hpp"
#include "metamux/spectrum.hpp"
#include "metamux/waveform.hpp"

using namespace metamux;
namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
    }
  }
  void note(const std::string& text) { detail += (detail.empty() ? "" : "; ") + text; }
};

std::string num(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

int failures = 0;

void run(int id, const std::string& name, double budget_s, bool gating, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.note(std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (secs > budget_s) o.check(false, "runtime " + num(secs, 3) + " s over " + num(budget_s) + " s");
  if (gating && !o.pass) ++failures;
  std::printf("criterion %2d %s%s: %s (%.2f s) %s\n", id, o.pass ? "PASS" : "FAIL",
              gating ? "" : " [non-gating]", name.c_str(), secs, o.detail.c_str());
  std::fflush(stdout);
}

const Alphabet kBpsk = Alphabet::complex_bpsk();

std::vector<cd> noisy(const std::vector<cd>& clean, std::size_t k, double ebn0_db, std::uint64_t seed,
                      double* sigma_sq) {
  const double v = calibrate_noise(clean, 2, k, ebn0_db).noise_variance;
  if (sigma_sq) *sigma_sq = v;
  return awgn(clean, v, seed);
}

std::vector<SymbolIndex> exhaustive_ml(std::span<const cd> y, const PulseShape& p, std::size_t lt) {
  const std::size_t a = kBpsk.size();
  std::size_t total = 1;
  for (std::size_t i = 0; i < lt; ++i) total *= a;
  double best = kInf;
  std::vector<SymbolIndex> best_seq(lt), seq(lt);
  std::vector<cd> x(lt);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t i = 0; i < lt; ++i) {
      seq[i] = static_cast<SymbolIndex>(c % a);
      x[i] = kBpsk[seq[i]];
      c /= a;
    }
    const auto s = encode(x, p);
    double d = 0.0;
    for (std::size_t t = 0; t < s.size(); ++t) d += std::norm(y[t] - s[t]);
    if (d < best) {
      best = d;
      best_seq = seq;
    }
  }
  return best_seq;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
  fs::create_directories(out);

  run(1, "Shannon reduction at K=1", 1.0, true, [] {
    Outcome o;
    const auto lam = symbol_subchannels(make_pulse(PulseKind::Rectangular, 1));
    const std::vector<double> lam_sq{lam[0] * lam[0]};
    double worst = 0.0;
    for (double snr : {0.1, 1.0, 10.0, 100.0}) {
      const auto c = capacity(lam, waterfill(lam_sq, 1.0, snr), std::nullopt, 1).total_bits_per_symbol;
      worst = std::max(worst, std::abs(c - 0.5 * std::log2(1.0 + snr)));
    }
    o.check(worst < 1e-12, "max deviation " + num(worst));
    o.note("max deviation " + num(worst, 3));
    return o;
  });

  run(2, "analytic singular values", 1.0, true, [] {
    Outcome o;
    const auto s = singular_spectrum(build_channel_matrix(PulseShape::raw({1.0, 1.0}), 2)).values;
    o.check(std::abs(s[0] - std::sqrt(3.0)) < 1e-10 && std::abs(s[1] - 1.0) < 1e-10, "[sqrt3, 1]");
    const auto h = build_channel_matrix(make_pulse(PulseKind::Rectangular, 4), 16);
    const auto got = singular_spectrum(h).values;
    const Eigen::MatrixXd d = h.dense();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(d.transpose() * d);
    double worst = 0.0;
    for (std::size_t i = 0; i < 16; ++i) {
      const double ref = std::sqrt(eig.eigenvalues()(static_cast<Eigen::Index>(15 - i)));
      worst = std::max(worst, std::abs(got[i] - ref) / ref);
    }
    o.check(worst < 1e-9, "K=4 relative deviation " + num(worst));
    o.note("K=4 L_t=16 max relative deviation " + num(worst, 3));
    return o;
  });

  run(3, "waterfilling", 1.0, true, [] {
    Outcome o;
    const std::vector<double> l2{3.0, 1.0};
    const auto w = waterfill(l2, 1.0, 2.0);
    o.check(w.mu == 5.0 / 3.0 && w.powers[0] == 4.0 / 3.0 && w.powers[1] == 2.0 / 3.0,
            "mu " + num(w.mu, 17) + " P " + num(w.powers[0], 17) + "," + num(w.powers[1], 17));
    const std::vector<double> lam{std::sqrt(3.0), 1.0};
    const double c = capacity(lam, w, std::nullopt, 2).total_bits_per_symbol;
    o.check(std::abs(c - 0.5 * std::log2(25.0 / 3.0)) < 1e-12, "C = " + num(c, 17));
    const double ci = capacity(lam, equal_power(2, 1.0, 2.0), std::nullopt, 2, CapacityMode::EqualPower)
                          .total_bits_per_symbol;
    o.check(std::abs(ci - 1.5) < 1e-12, "C_I = " + num(ci, 17));
    Rng rng(3);
    std::uniform_real_distribution<double> u(0.01, 5.0);
    std::size_t violations = 0;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> sv(1 + trial % 12), sq;
      for (auto& v : sv) v = u(rng);
      for (double v : sv) sq.push_back(v * v);
      const double p = u(rng), n = u(rng);
      const double cw = capacity(sv, waterfill(sq, n, p), std::nullopt, 1).total_bits_per_symbol;
      const double ce = capacity(sv, equal_power(sv.size(), n, p), std::nullopt, 1, CapacityMode::EqualPower)
                            .total_bits_per_symbol;
      violations += cw + 1e-12 < ce ? 1 : 0;
    }
    o.check(violations == 0, std::to_string(violations) + " configs with C < C_I");
    o.note("mu=5/3, C=" + num(c, 12) + ", C_I=" + num(ci, 12) + ", 100 random configs C>=C_I");
    return o;
  });

  run(4, "encoder equals H x", 5.0, true, [] {
    Outcome o;
    Rng rng(4);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = 0.0;
    for (std::size_t trial = 0; trial < 100; ++trial) {
      const std::size_t k = 1 + trial % 16, lt = 1 + (trial * 37) % 64;
      std::vector<double> taps(k);
      for (auto& t : taps) t = g(rng);
      taps[0] = 1.0;
      const auto p = PulseShape::from_taps(taps);
      std::vector<cd> x(lt);
      for (auto& v : x) v = cd{g(rng), g(rng)};
      const auto s = encode(x, p);
      const Eigen::MatrixXd h = build_channel_matrix(p, lt).dense();
      Eigen::VectorXcd xv(lt);
      for (std::size_t i = 0; i < lt; ++i) xv(static_cast<Eigen::Index>(i)) = x[i];
      const Eigen::VectorXcd hx = h.cast<cd>() * xv;
      for (std::size_t i = 0; i < s.size(); ++i)
        worst = std::max(worst, std::abs(s[i] - hx(static_cast<Eigen::Index>(i))));
    }
    o.check(worst < 1e-12, "max deviation " + num(worst));
    o.note("max deviation " + num(worst, 3));
    return o;
  });

  run(5, "Viterbi equals exhaustive ML", 10.0, true, [] {
    Outcome o;
    const auto p = make_pulse(PulseKind::Rectangular, 3);
    std::size_t mismatched = 0;
    for (std::uint64_t f = 0; f < 50; ++f) {
      const auto fr = make_frame(random_bits(12, 500 + f), p, kBpsk);
      const auto y = noisy(fr.samples, 3, 12.0, 900 + f, nullptr);
      if (viterbi_decode(y, p, kBpsk).symbols != exhaustive_ml(y, p, 6)) ++mismatched;
    }
    o.check(mismatched == 0, std::to_string(mismatched) + " of 50 frames differ");
    o.note(std::to_string(50 - mismatched) + "/50 frames identical");
    return o;
  });

  run(6, "SMC fidelity", 60.0, true, [] {
    Outcome o;
    const auto p3 = make_pulse(PulseKind::Rectangular, 3);
    SmcConfig c;
    c.particles = 2000;
    std::size_t same = 0, total = 0;
    for (std::uint64_t f = 0; f < 20; ++f) {
      const auto fr = make_frame(random_bits(400, 600 + f), p3, kBpsk);
      double v = 0.0;
      const auto y = noisy(fr.samples, 3, 12.0, 700 + f, &v);
      const auto a = viterbi_decode(y, p3, kBpsk).symbols;
      const auto b = smc_decode(y, p3, kBpsk, v, c, 800 + f).symbols;
      for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i] ? 1 : 0;
      total += a.size();
    }
    const double agree = static_cast<double>(same) / static_cast<double>(total);
    o.check(agree >= 0.99, "agreement " + num(agree));
    for (long k : {2L, 4L, 8L, 16L}) {
      const auto p = make_pulse(PulseKind::Rectangular, k);
      const auto fr = make_frame(random_bits(400, 40 + static_cast<std::uint64_t>(k)), p, kBpsk);
      const auto r = smc_decode(fr.samples, p, kBpsk, 0.0, c, 7);
      o.check(r.symbols == fr.symbols, "noiseless K=" + std::to_string(k));
    }
    o.note("agreement with Viterbi " + num(agree, 5) + " over 20 frames; noiseless K=2,4,8,16 checked");
    return o;
  });

  run(7, "bandwidth table", 10.0, true, [&] {
    Outcome o;
    auto within = [&](double got, double want, double rel, const std::string& what) {
      o.check(std::abs(got - want) <= rel * want, what + " " + num(got) + " vs " + num(want));
      o.note(what + " " + num(got, 5) + "/T");
    };
    const auto rect = magnitude_spectrum(make_pulse(PulseKind::Rectangular, 50), 256);
    const auto r35 = bounded_psd_bandwidth(rect, 35.0);
    o.check(r35.within_grid, "rectangle 35 dB inside grid");
    within(r35.hz, 49.30, 0.02, "rect BPSD35");
    within(fpcb_bandwidth(rect, 0.99), 18.28, 0.02, "rect FPCB99");
    const auto t35 = magnitude_spectrum(make_pulse(PulseKind::Taylor, 128, {35.0, 0}), 256);
    within(bounded_psd_bandwidth(t35, 35.0).hz, 3.16, 0.10, "taylor35 BPSD35");
    within(fpcb_bandwidth(t35, 0.99), 2.35, 0.10, "taylor35 FPCB99");
    const auto t50 = magnitude_spectrum(make_pulse(PulseKind::Taylor, 128, {50.0, 0}), 256);
    within(bounded_psd_bandwidth(t50, 50.0).hz, 3.90, 0.10, "taylor50 BPSD50");
    within(fpcb_bandwidth(t50, 0.99), 2.74, 0.10, "taylor50 FPCB99");
    for (long k : {50L, 100L, 200L}) {
      const auto s = magnitude_spectrum(make_pulse(PulseKind::Rectangular, k), 256);
      o.check(!bounded_psd_bandwidth(s, 50.0).within_grid, "rectangle K=" + std::to_string(k) + " 50 dB exceeds grid");
    }
    o.note("rect 50 dB exceeds grid at K=50,100,200");

    ExperimentConfig c;
    c.seed = 7;
    c.k = 100;
    c.waveform = WaveformSpec::parse("taylor35");
    c.spectrum.welch_symbols = std::size_t{1} << 24;
    const auto rep = run_spectrum_report(c);
    save_spectrum_report(rep, c, out / "spectrum_taylor35_k100");
    const double pulse35 = rep.pulse_bandwidth.bounded_psd.at(35.0).hz;
    const double signal35 = rep.signal_bandwidth->bounded_psd.at(35.0).hz;
    o.check(signal35 <= 1.1 * pulse35, "multiplexed BPSD35 " + num(signal35) + " vs pulse " + num(pulse35));
    o.note("multiplexed K=100 BPSD35 " + num(signal35, 5) + "/T vs pulse " + num(pulse35, 5) + "/T");
    return o;
  });

  run(8, "capacity-vs-K shape", 5.0, true, [] {
    Outcome o;
    std::string series;
    double prev = -1.0;
    for (long k : {1L, 2L, 4L, 8L}) {
      const auto lam = symbol_subchannels(make_pulse(PulseKind::Rectangular, k));
      const double c = capacity_ebn0(lam, 2.0, 1.0 / static_cast<double>(k), 10.0, CapacityMode::EqualPower)
                           .total_bits_per_symbol;
      o.check(c > prev, "C_I not increasing at K=" + std::to_string(k));
      prev = c;
      series += (series.empty() ? "" : ",") + num(c, 5);
    }
    const auto rect = symbol_subchannels(make_pulse(PulseKind::Rectangular, 100));
    const auto tay = symbol_subchannels(make_pulse(PulseKind::Taylor, 100, {35.0, 0}));
    const double cr = capacity_ebn0(rect, 2.0, 0.01, 20.0, CapacityMode::EqualPower).total_bits_per_symbol;
    const double ct = capacity_ebn0(tay, 2.0, 0.01, 20.0, CapacityMode::EqualPower).total_bits_per_symbol;
    o.check(cr > ct, "rectangle " + num(cr) + " <= taylor " + num(ct));
    o.note("rect K=1,2,4,8 at 10 dB: " + series + "; K=100 at 20 dB rect " + num(cr, 5) + " > taylor35 " + num(ct, 5));
    return o;
  });

  run(9, "BER behavior K=8 SMC", 300.0, true, [&] {
    Outcome o;
    ExperimentConfig c;
    c.seed = 9;
    c.k = 8;
    c.waveform = WaveformSpec::parse("rect");
    c.decoder = DecoderChoice::Smc;
    c.smc.particles = 2048;
    c.bits = 100000;
    c.min_errors = 0;
    c.ebn0_db = {10.0, 14.0, 18.0};
    auto csv = detail::open_output(out / "ber_k8.csv");
    const auto r = run_ber_sweep(c, &csv);
    for (std::size_t i = 0; i < r.size(); ++i) {
      o.check(r[i].bits_sent >= 100000, "bits at " + num(r[i].ebn0_db));
      if (i > 0) o.check(r[i].ber < r[i - 1].ber, "BER not decreasing at " + num(r[i].ebn0_db) + " dB");
      o.note(num(r[i].ebn0_db) + " dB: " + std::to_string(r[i].bit_errors) + "/" + std::to_string(r[i].bits_sent));
    }
    c.ebn0_db = {kInf};
    c.bits = 10000;
    const auto z = run_ber_sweep(c);
    o.check(z[0].bit_errors == 0, "noiseless errors " + std::to_string(z[0].bit_errors));
    o.note("noiseless: " + std::to_string(z[0].bit_errors) + " errors");
    return o;
  });

  run(10, "spectrum sharing", 600.0, true, [&] {
    Outcome o;
    ExperimentConfig c;
    c.seed = 10;
    c.k = 100;
    c.waveform = WaveformSpec::parse("taylor35");
    c.smc.particles = 500;
    c.bits = 100000;
    c.min_errors = 100;
    c.ebn0_db = parse_range("36:1:41");
    InterfererConfig ic;
    ic.preset = "desk";
    ic.order = 256;
    ic.power_db = 0.0;
    c.interferer = ic;
    auto csv = detail::open_output(out / "share.csv");
    const auto r = run_sharing_experiment(c, &csv);
    detail::write_json(out / "penalty.json", to_json(r, c));
    for (const auto& pt : r.points) {
      o.check(pt.joint.bit_errors <= pt.naive.bit_errors, "joint worse than naive at " + num(pt.joint.ebn0_db));
      o.note(num(pt.joint.ebn0_db) + " dB base/joint/naive " + num(pt.baseline.ber, 3) + "/" + num(pt.joint.ber, 3) +
             "/" + num(pt.naive.ber, 3));
    }
    const auto& pen = r.penalty;
    o.check(pen.reference_point_db.has_value(), "baseline never below 1e-3");
    o.check(pen.penalty_db.has_value(), "penalty not measurable");
    if (pen.penalty_db) {
      o.check(*pen.penalty_db <= 4.0, "penalty " + num(*pen.penalty_db) + " dB");
      o.note("penalty " + num(*pen.penalty_db, 4) + " dB at BER 1e-3 (baseline " + num(*pen.baseline_db, 5) + " dB)");
    }
    if (pen.reference_point_db) o.note("lowest baseline point below 1e-3: " + num(*pen.reference_point_db) + " dB");
    return o;
  });

  run(11, "exploratory K=128 Taylor-35 BER", 900.0, false, [&] {
    Outcome o;
    ExperimentConfig c;
    c.seed = 11;
    c.k = 128;
    c.waveform = WaveformSpec::parse("taylor35");
    c.decoder = DecoderChoice::Smc;
    c.smc.particles = 1000;
    c.bits = 100000;
    c.min_errors = 100;
    c.ebn0_db = parse_range("30:3:45");
    auto csv = detail::open_output(out / "ber_k128_taylor35.csv");
    for (const auto& rec : run_ber_sweep(c, &csv)) o.note(num(rec.ebn0_db) + " dB: " + num(rec.ber, 3));
    return o;
  });

  run(12, "determinism", 60.0, true, [&] {
    Outcome o;
    ExperimentConfig base;
    base.seed = 12;
    base.capacity.k_list = {1, 4, 16, 64};
    base.ebn0_db = {4.0, 8.0};
    base.k = 4;
    base.bits = 20000;
    base.min_errors = 50;
    base.smc.particles = 256;
    base.decoder = DecoderChoice::Smc;
    base.spectrum.welch_symbols = 50000;

    auto render = [&](std::size_t threads, const fs::path& dir) {
      auto c = base;
      c.threads = threads;
      fs::create_directories(dir);
      save_capacity_sweep(run_capacity_sweep(c), dir);
      {
        auto csv = detail::open_output(dir / "ber.csv");
        run_ber_sweep(c, &csv);
      }
      save_spectrum_report(run_spectrum_report(c), c, dir);
      auto s = c;
      s.k = 100;
      s.waveform = WaveformSpec::parse("taylor35");
      s.ebn0_db = {30.0, 38.0};
      s.frame_symbols = 400;
      s.smc.particles = 100;
      s.bits = 10000;
      s.interferer = InterfererConfig{};
      {
        auto csv = detail::open_output(dir / "share.csv");
        detail::write_json(dir / "penalty.json", to_json(run_sharing_experiment(s, &csv), s));
      }
    };
    const auto a = out / "determinism_a", b = out / "determinism_b";
    fs::remove_all(a);
    fs::remove_all(b);
    render(1, a);
    render(3, b);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
      ++files;
      const auto other = b / e.path().filename();
      o.check(fs::exists(other) && slurp(e.path()) == slurp(other), e.path().filename().string() + " differs");
    }
    o.check(files >= 8, "only " + std::to_string(files) + " files");
    o.note(std::to_string(files) + " files byte-identical between 1 and 3 threads");
    return o;
  });

  std::printf("%d gating criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
