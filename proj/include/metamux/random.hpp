#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace metamux {

using Rng = std::mt19937_64;

// SplitMix64 finalizer. Used to decorrelate derived seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream identifiers for per-frame seed derivation.
enum class SeedStream : std::uint64_t {
  Bits = 1,
  Noise = 2,
  Decoder = 3,
  InterfererBits = 4,
};

// Seed of one frame, a pure function of (master, grid point, frame, stream).
// Frames can be processed in any order or in parallel without changing
// results.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t point,
                                    std::uint64_t frame,
                                    SeedStream stream) noexcept {
  std::uint64_t s = mix_seed(master);
  s = mix_seed(s ^ (point * 0xd1b54a32d192ed03ULL));
  s = mix_seed(s ^ (frame * 0x8cb92ba72f3d8dd7ULL));
  return mix_seed(s ^ static_cast<std::uint64_t>(stream));
}

inline std::vector<std::uint8_t> random_bits(std::size_t count,
                                             std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint8_t> bits(count);
  // 64 bits per draw.
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < count; ++i) {
    if (i % 64 == 0) word = rng();
    bits[i] = static_cast<std::uint8_t>((word >> (i % 64)) & 1U);
  }
  return bits;
}

inline std::size_t count_bit_errors(std::span<const std::uint8_t> a,
                                    std::span<const std::uint8_t> b) {
  std::size_t errors = 0;
  const std::size_t n = a.size() < b.size() ? a.size() : b.size();
  for (std::size_t i = 0; i < n; ++i) errors += (a[i] != b[i]) ? 1 : 0;
  return errors + (a.size() > b.size() ? a.size() - b.size()
                                       : b.size() - a.size());
}

}  // namespace metamux
