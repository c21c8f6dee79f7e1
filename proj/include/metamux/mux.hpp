#pragma once

// Overlap encoding and the equivalent channel matrix y = H x.

#include <algorithm>
#include <complex>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "metamux/alphabet.hpp"
#include "metamux/error.hpp"
#include "metamux/waveform.hpp"

namespace metamux {

// Full convolution s_t = sum_k h_k x_{t-k}, one symbol per sample.
// Output length is L_t + K - 1.
inline std::vector<cd> encode(std::span<const cd> symbols, const PulseShape& pulse) {
  detail::require(!symbols.empty(), "encode: no symbols");
  const auto taps = pulse.taps();
  const std::size_t k = taps.size();
  std::vector<cd> out(symbols.size() + k - 1, cd{0.0, 0.0});
  for (std::size_t t = 0; t < symbols.size(); ++t) {
    const cd x = symbols[t];
    for (std::size_t j = 0; j < k; ++j) out[t + j] += taps[j] * x;
  }
  return out;
}

// Banded Toeplitz matrix with column c holding the taps at rows c..c+K-1.
class ChannelMatrix {
 public:
  ChannelMatrix(const PulseShape& pulse, std::size_t frame_symbols)
      : taps_(pulse.taps().begin(), pulse.taps().end()), cols_(frame_symbols) {
    detail::require(frame_symbols >= 1, "build_channel_matrix: L_t must be >= 1");
  }

  std::size_t rows() const noexcept { return cols_ + taps_.size() - 1; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t bandwidth() const noexcept { return taps_.size(); }
  std::span<const double> taps() const noexcept { return taps_; }

  double entry(std::size_t r, std::size_t c) const {
    if (r < c) return 0.0;
    const std::size_t d = r - c;
    return d < taps_.size() ? taps_[d] : 0.0;
  }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows()),
                                              static_cast<Eigen::Index>(cols_));
    for (std::size_t c = 0; c < cols_; ++c)
      for (std::size_t d = 0; d < taps_.size(); ++d)
        m(static_cast<Eigen::Index>(c + d), static_cast<Eigen::Index>(c)) = taps_[d];
    return m;
  }

  // H^T H: symmetric Toeplitz with the tap autocorrelation on its band.
  Eigen::MatrixXd gram() const {
    const std::size_t k = taps_.size();
    std::vector<double> r(k, 0.0);
    for (std::size_t lag = 0; lag < k; ++lag)
      for (std::size_t i = 0; i + lag < k; ++i) r[lag] += taps_[i] * taps_[i + lag];
    const auto n = static_cast<Eigen::Index>(cols_);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = std::max<Eigen::Index>(0, i - static_cast<Eigen::Index>(k) + 1);
           j <= i; ++j) {
        g(i, j) = g(j, i) = r[static_cast<std::size_t>(i - j)];
      }
    return g;
  }

  void write_csv(std::ostream& out) const {
    for (std::size_t r = 0; r < rows(); ++r) {
      for (std::size_t c = 0; c < cols_; ++c) {
        if (c) out << ',';
        out << entry(r, c);
      }
      out << '\n';
    }
  }

 private:
  std::vector<double> taps_;
  std::size_t cols_;
};

inline ChannelMatrix build_channel_matrix(const PulseShape& pulse, std::size_t frame_symbols) {
  return ChannelMatrix(pulse, frame_symbols);
}

struct SingularSpectrum {
  std::vector<double> values;  // descending
  // Present only when factors were requested: H = U * diag * V^T.
  std::optional<Eigen::MatrixXd> u;
  std::optional<Eigen::MatrixXd> v;

  std::vector<double> squared() const {
    std::vector<double> s(values.size());
    std::transform(values.begin(), values.end(), s.begin(), [](double x) { return x * x; });
    return s;
  }
};

struct SvdOptions {
  bool compute_factors = false;
  // From this L_t on, values come from the Gram eigenvalues instead of a
  // dense SVD.
  std::size_t gram_threshold = 2048;
};

inline SingularSpectrum singular_spectrum(const ChannelMatrix& h, SvdOptions options = {}) {
  SingularSpectrum out;
  if (!options.compute_factors && h.cols() >= options.gram_threshold) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h.gram(), Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success)
      throw NumericalError("singular_spectrum: Gram eigensolver did not converge");
    const auto& ev = eig.eigenvalues();
    out.values.resize(static_cast<std::size_t>(ev.size()));
    for (Eigen::Index i = 0; i < ev.size(); ++i)
      out.values[static_cast<std::size_t>(i)] = std::sqrt(std::max(ev(i), 0.0));
  } else {
    const unsigned flags = options.compute_factors ? (Eigen::ComputeFullU | Eigen::ComputeFullV) : 0U;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(h.dense(), flags);
    if (svd.info() != Eigen::Success)
      throw NumericalError("singular_spectrum: SVD did not converge");
    const auto& sv = svd.singularValues();
    out.values.assign(sv.data(), sv.data() + sv.size());
    if (options.compute_factors) {
      out.u = svd.matrixU();
      out.v = svd.matrixV();
    }
  }
  std::sort(out.values.begin(), out.values.end(), std::greater<>());
  if (out.values.size() != h.cols())
    throw NumericalError("singular_spectrum: expected one value per column");
  return out;
}

// One encoded block: bits -> symbols -> overlapped samples.
struct Frame {
  std::vector<std::uint8_t> bits;
  std::vector<SymbolIndex> symbols;
  std::vector<cd> samples;
};

inline Frame make_frame(std::vector<std::uint8_t> bits, const PulseShape& pulse,
                        const Alphabet& alphabet) {
  Frame f;
  f.symbols = bits_to_indices(bits, alphabet);
  f.bits = std::move(bits);
  const auto points = indices_to_points(f.symbols, alphabet);
  f.samples = encode(points, pulse);
  return f;
}

}  // namespace metamux
