#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "metamux/error.hpp"

namespace metamux {

using cd = std::complex<double>;
using SymbolIndex = std::uint16_t;

// Constellation whose point at index i carries the bit label i
// (MSB first). Unit mean energy.
class Alphabet {
 public:
  Alphabet(std::vector<cd> points, std::string name) : points_(std::move(points)), name_(std::move(name)) {
    const std::size_t m = points_.size();
    detail::require(m >= 2 && (m & (m - 1)) == 0, "alphabet: size must be a power of two >= 2");
    detail::require(m <= 256, "alphabet: at most 256 points");
    bits_ = 0;
    while ((std::size_t{1} << bits_) < m) ++bits_;
    double energy = 0.0;
    for (const auto& p : points_) energy += std::norm(p);
    detail::require(std::abs(energy / static_cast<double>(m) - 1.0) < 1e-12,
                    "alphabet: mean energy must be 1");
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        detail::require(std::abs(points_[i] - points_[j]) > 1e-9, "alphabet: duplicate point");
      }
    }
  }

  // The overlapped-stream input alphabet (+1, +j, -1, -j) with Gray labels
  // 00 -> +1, 01 -> +j, 11 -> -1, 10 -> -j.
  static Alphabet complex_bpsk() {
    return Alphabet({cd{1, 0}, cd{0, 1}, cd{0, -1}, cd{-1, 0}}, "cbpsk");
  }

  // Square M-QAM, Gray coded per axis: the first half of the label selects
  // the in-phase level, the second half the quadrature level.
  static Alphabet square_qam(std::size_t order) {
    std::size_t side = 1;
    while (side * side < order) ++side;
    detail::require(order >= 4 && side * side == order && (side & (side - 1)) == 0,
                    "square_qam: order must be a power of 4");
    unsigned axis_bits = 0;
    while ((std::size_t{1} << axis_bits) < side) ++axis_bits;
    // Mean energy of the unscaled grid {+-1, +-3, ...}^2 is 2 (M - 1) / 3.
    const double scale = 1.0 / std::sqrt(2.0 * (static_cast<double>(order) - 1.0) / 3.0);
    auto level = [&](std::size_t gray) {
      std::size_t bin = gray;  // Gray -> binary position
      for (std::size_t s = gray >> 1; s != 0; s >>= 1) bin ^= s;
      return (2.0 * static_cast<double>(bin) - static_cast<double>(side - 1)) * scale;
    };
    std::vector<cd> points(order);
    for (std::size_t label = 0; label < order; ++label) {
      const std::size_t i_bits = label >> axis_bits;
      const std::size_t q_bits = label & (side - 1);
      points[label] = cd{level(i_bits), level(q_bits)};
    }
    return Alphabet(std::move(points), std::to_string(order) + "qam");
  }

  static Alphabet parse(const std::string& name) {
    if (name == "cbpsk") return complex_bpsk();
    throw ConfigError("unknown alphabet '" + name + "' (expected cbpsk)");
  }

  std::size_t size() const noexcept { return points_.size(); }
  unsigned bits_per_symbol() const noexcept { return bits_; }
  std::span<const cd> points() const noexcept { return points_; }
  const cd& operator[](std::size_t i) const { return points_[i]; }
  const std::string& name() const noexcept { return name_; }

  SymbolIndex nearest(cd y) const {
    SymbolIndex best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const double d = std::norm(y - points_[i]);
      if (d < best_d) {
        best_d = d;
        best = static_cast<SymbolIndex>(i);
      }
    }
    return best;
  }

  double min_distance() const {
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points_.size(); ++i)
      for (std::size_t j = i + 1; j < points_.size(); ++j) d = std::min(d, std::abs(points_[i] - points_[j]));
    return d;
  }

 private:
  std::vector<cd> points_;
  std::string name_;
  unsigned bits_ = 0;
};

inline std::vector<SymbolIndex> bits_to_indices(std::span<const std::uint8_t> bits,
                                                const Alphabet& alphabet) {
  const unsigned eta = alphabet.bits_per_symbol();
  detail::require(bits.size() % eta == 0, "map_bits: bit count not divisible by bits per symbol");
  std::vector<SymbolIndex> out(bits.size() / eta);
  for (std::size_t s = 0; s < out.size(); ++s) {
    unsigned label = 0;
    for (unsigned b = 0; b < eta; ++b) label = (label << 1) | (bits[s * eta + b] & 1U);
    out[s] = static_cast<SymbolIndex>(label);
  }
  return out;
}

inline std::vector<std::uint8_t> indices_to_bits(std::span<const SymbolIndex> symbols,
                                                 const Alphabet& alphabet) {
  const unsigned eta = alphabet.bits_per_symbol();
  std::vector<std::uint8_t> bits(symbols.size() * eta);
  for (std::size_t s = 0; s < symbols.size(); ++s) {
    for (unsigned b = 0; b < eta; ++b) {
      bits[s * eta + b] = static_cast<std::uint8_t>((symbols[s] >> (eta - 1 - b)) & 1U);
    }
  }
  return bits;
}

inline std::vector<cd> indices_to_points(std::span<const SymbolIndex> symbols,
                                         const Alphabet& alphabet) {
  std::vector<cd> out(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) out[i] = alphabet[symbols[i]];
  return out;
}

inline std::vector<cd> map_bits(std::span<const std::uint8_t> bits, const Alphabet& alphabet) {
  return indices_to_points(bits_to_indices(bits, alphabet), alphabet);
}

// Hard decision per symbol, then the bit labels.
inline std::vector<std::uint8_t> demap_symbols(std::span<const cd> symbols,
                                               const Alphabet& alphabet) {
  std::vector<SymbolIndex> idx(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) idx[i] = alphabet.nearest(symbols[i]);
  return indices_to_bits(idx, alphabet);
}

}  // namespace metamux
