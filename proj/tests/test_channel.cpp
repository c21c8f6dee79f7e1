#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "metamux/channel.hpp"
#include "metamux/mux.hpp"
#include "metamux/random.hpp"
#include "metamux/spectrum.hpp"

using namespace metamux;

namespace {

std::vector<cd> unit_energy_samples(std::size_t n) {
  // Alternating unit-modulus samples.
  std::vector<cd> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = (i % 2) ? cd{0.0, 1.0} : cd{-1.0, 0.0};
  return v;
}

}  // namespace

TEST(Calibration, UnitEnergyAtZeroDb) {
  const auto s = unit_energy_samples(64);
  const auto c = calibrate_noise(s, 2, 8, 0.0);
  EXPECT_NEAR(c.noise_variance, 0.5, 1e-15);
  EXPECT_EQ(c.bits_per_symbol_total, 16u);
  EXPECT_NEAR(c.sample_energy, 1.0, 1e-15);
}

TEST(Calibration, LimitsAndHomogeneity) {
  auto s = unit_energy_samples(32);
  EXPECT_EQ(calibrate_noise(s, 2, 4, std::numeric_limits<double>::infinity()).noise_variance, 0.0);
  EXPECT_LT(calibrate_noise(s, 2, 4, 200.0).noise_variance, 1e-19);
  const double base = calibrate_noise(s, 2, 4, 7.0).noise_variance;
  for (auto& v : s) v *= 3.0;
  EXPECT_NEAR(calibrate_noise(s, 2, 4, 7.0).noise_variance, 9.0 * base, 1e-12);
}

TEST(Calibration, Errors) {
  const std::vector<cd> zeros(10);
  EXPECT_THROW(calibrate_noise({}, 2, 4, 0.0), ConfigError);
  EXPECT_THROW(calibrate_noise(zeros, 2, 4, 0.0), ConfigError);
}

TEST(Awgn, ZeroVarianceIsIdentity) {
  const auto s = unit_energy_samples(100);
  EXPECT_EQ(awgn(s, 0.0, 1), s);
  EXPECT_THROW(awgn(s, -1.0, 1), ConfigError);
}

TEST(Awgn, VarianceCircularityAndWhiteness) {
  const std::size_t n = 1000000;
  const std::vector<cd> zeros(n);
  const double var = 0.37;
  const auto z = awgn(zeros, var, 99);
  double re = 0.0, im = 0.0;
  for (const auto& v : z) {
    re += v.real() * v.real();
    im += v.imag() * v.imag();
  }
  EXPECT_NEAR((re + im) / n, var, 0.01 * var);
  EXPECT_NEAR(re / n, var / 2, 0.01 * var);
  EXPECT_NEAR(im / n, var / 2, 0.01 * var);
  const double bound = 3.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t lag : {1u, 2u, 5u, 17u}) {
    cd acc{0.0, 0.0};
    for (std::size_t i = lag; i < n; ++i) acc += z[i] * std::conj(z[i - lag]);
    EXPECT_LT(std::abs(acc) / ((re + im)), bound) << lag;
  }
}

TEST(Awgn, DeterministicInSeed) {
  const auto s = unit_energy_samples(1000);
  EXPECT_EQ(awgn(s, 0.2, 5), awgn(s, 0.2, 5));
  EXPECT_NE(awgn(s, 0.2, 5), awgn(s, 0.2, 6));
}

TEST(Calibration, RoundTripRecoversEbn0) {
  const auto a = Alphabet::complex_bpsk();
  const auto p = make_pulse(PulseKind::Taylor, 16, {35.0, 4});
  const auto f = make_frame(random_bits(2 * 1000000, 4), p, a);
  for (double e : {0.0, 7.5, 15.0}) {
    const auto c = calibrate_noise(f.samples, 2, 16, e);
    const auto y = awgn(f.samples, c.noise_variance, 11);
    EXPECT_NEAR(measure_ebn0_db(f.samples, y, 2), e, 0.1);
  }
}

// ---------------------------------------------------------------------------

TEST(Interferer, PresetsAndValidation) {
  const auto desk = InterfererParams::desk_preset(100.0);
  EXPECT_NO_THROW(desk.validate());
  EXPECT_NEAR(desk.occupied_bandwidth_hz(), 40.0, 1e-12);
  const auto wide = InterfererParams::wide_preset(1e6);
  EXPECT_NO_THROW(wide.validate());
  EXPECT_NEAR(wide.occupied_bandwidth_hz(), 750e3, 1e-6);
  auto bad = desk;
  bad.order = 32;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = desk;
  bad.carrier_offset_hz = 40.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = desk;
  bad.rolloff = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Interferer, RrcIsNyquistAfterMatchedFiltering) {
  // RRC * RRC sampled at symbol spacing: 1 at 0, ~0 elsewhere.
  const double a = 0.25;
  const int os = 64, span = 40;
  auto rc = [&](int m) {
    double acc = 0.0;
    for (int i = -span * os; i <= span * os; ++i) {
      const double t = static_cast<double>(i) / os;
      acc += rrc_pulse(t, a) * rrc_pulse(t - m, a);
    }
    return acc / os;
  };
  EXPECT_NEAR(rc(0), 1.0, 2e-3);
  for (int m : {1, 2, 3}) EXPECT_NEAR(rc(m), 0.0, 2e-3);
}

TEST(Interferer, UnitPowerAndBandwidth) {
  InterfererParams p;
  p.order = 4;
  p.sample_rate_hz = 1.0;
  p.symbol_rate_hz = 0.125;
  p.carrier_offset_hz = 0.0;
  const std::size_t n = 1 << 18;
  const auto count = qam_layout(p, n).count;
  const auto x = make_qam_interferer(p, random_bits(2 * count, 8), n);
  // Power over the fully populated region.
  const std::size_t lo = 16 * 8, hi = n - 16 * 8;
  double e = 0.0;
  for (std::size_t i = lo; i < hi; ++i) e += std::norm(x[i]);
  EXPECT_NEAR(e / (hi - lo), 1.0, 0.03);

  const auto s = welch_psd(x, 4096, 0.5, 1.0, p.symbol_rate_hz);
  const double occupied = fpcb_bandwidth(s, 0.999);
  // Oracle: 99.9% width of the raised-cosine power spectrum by direct integration.
  const double rs = p.symbol_rate_hz, a = p.rolloff, edge = (1.0 - a) * rs / 2;
  auto rc = [&](double f) {
    if (f <= edge) return 1.0;
    if (f >= (1.0 + a) * rs / 2) return 0.0;
    return 0.5 * (1.0 + std::cos(M_PI / (a * rs) * (f - edge)));
  };
  const int steps = 200000;
  const double df = p.occupied_bandwidth_hz() / 2 / steps;
  double total = 0.0;
  for (int i = 0; i < steps; ++i) total += rc((i + 0.5) * df);
  double acc = 0.0, expect = 0.0;
  for (int i = 0; i < steps; ++i) {
    acc += rc((i + 0.5) * df);
    if (acc >= 0.999 * total) {
      expect = 2.0 * (i + 1) * df;
      break;
    }
  }
  EXPECT_LT(expect, p.occupied_bandwidth_hz());
  EXPECT_NEAR(occupied, expect, 0.03 * expect);
}

TEST(Interferer, CarrierOffsetShiftsPeak) {
  InterfererParams p;
  p.order = 16;
  p.sample_rate_hz = 1.0;
  p.symbol_rate_hz = 0.05;
  p.rolloff = 0.25;
  const std::size_t n = 1 << 16;
  const auto count = qam_layout(p, n).count;
  const auto bits = random_bits(4 * count, 1);
  auto centroid = [&](double offset) {
    p.carrier_offset_hz = offset;
    const auto s = welch_psd(make_qam_interferer(p, bits, n), 2048, 0.5, 1.0, 1.0);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double w = std::pow(10.0, s.density_db[i] / 10.0);
      num += w * s.freqs[i];
      den += w;
    }
    return std::pair{num / den, s.resolution};
  };
  const auto [c0, res] = centroid(0.0);
  const auto [c1, res1] = centroid(0.2);
  EXPECT_NEAR(c1 - c0, 0.2, res);
}

TEST(Interferer, NoiselessRoundTrip) {
  for (auto p : {InterfererParams::desk_preset(100.0), InterfererParams::wide_preset(100.0)}) {
    const std::size_t n = 1099;
    const auto count = qam_layout(p, n).count;
    ASSERT_GT(count, 100u);
    const auto bits = random_bits(8 * count, 21);
    const auto x = make_qam_interferer(p, bits, n);
    const auto r = demodulate_qam(x, p, count);
    EXPECT_EQ(r.bits, bits);
    EXPECT_EQ(r.unreliable_fraction, 0.0);
  }
}

TEST(Interferer, Errors) {
  auto p = InterfererParams::desk_preset(100.0);
  const std::vector<std::uint8_t> seven(7, 0);
  EXPECT_THROW(make_qam_interferer(p, seven, 1000), ConfigError);
  const auto too_many = random_bits(8 * (qam_layout(p, 500).count + 1), 1);
  EXPECT_THROW(make_qam_interferer(p, too_many, 500), ConfigError);
}

TEST(Superpose, ReductionPaddingAndPower) {
  const auto a = Alphabet::complex_bpsk();
  const auto meta = make_frame(random_bits(2 * 50000, 1), make_pulse(PulseKind::Taylor, 20, {35.0, 4}), a).samples;
  const auto same = superpose(meta, meta, -std::numeric_limits<double>::infinity());
  EXPECT_EQ(same, meta);

  const std::vector<cd> shorter(10, cd{1.0, 0.0});
  const std::vector<cd> longer(15, cd{0.0, 1.0});
  const auto padded = superpose(shorter, longer, 0.0);
  ASSERT_EQ(padded.size(), 15u);
  EXPECT_EQ(padded[3], cd(1.0, 1.0));
  EXPECT_EQ(padded[12], cd(0.0, 1.0));

  const auto other = make_frame(random_bits(2 * 50000, 2), make_pulse(PulseKind::Taylor, 20, {35.0, 4}), a).samples;
  const auto mix = superpose(meta, other, 0.0);
  EXPECT_NEAR(mean_power(mix) / mean_power(meta), 2.0, 0.04);
  const auto hot = superpose(meta, other, 6.0);
  EXPECT_NEAR(mean_power(hot) / mean_power(meta), 1.0 + std::pow(10.0, 0.6), 0.1);
}

TEST(Superpose, BothBandsVisible) {
  const double fs = 100.0;
  const auto p = InterfererParams::desk_preset(fs);
  const auto a = Alphabet::complex_bpsk();
  const auto pulse = make_pulse(PulseKind::Taylor, 100, {35.0, 4});
  const auto meta = make_frame(random_bits(2 * 20000, 3), pulse, a).samples;
  const auto qam = make_qam_interferer(p, random_bits(8 * qam_layout(p, meta.size()).count, 4), meta.size());
  const auto s = welch_psd(superpose(meta, qam, 0.0), 4096, 0.5, fs, 1.0);
  auto level_at = [&](double f) {
    std::size_t best = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (std::abs(s.freqs[i] - f) < std::abs(s.freqs[best] - f)) best = i;
    return s.density_db[best];
  };
  // The meta main lobe and the QAM band both stand well above the gap between them.
  EXPECT_GT(level_at(0.0), level_at(-20.0) + 20.0);
  EXPECT_GT(level_at(p.carrier_offset_hz), level_at(-20.0) + 20.0);
}
