#ifndef CRB_DETAIL_FFT_HPP
#define CRB_DETAIL_FFT_HPP

#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

namespace crb::detail {

/// In-place iterative radix-2 DFT, X_j = sum_k x_k exp(-2*pi*i*j*k/N).
/// Size must be a power of two.
inline void fft_pow2(std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  if (n < 2) return;
  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(angle), std::sin(angle));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = x[i + j];
        const std::complex<double> v = x[i + j + len / 2] * w;
        x[i + j] = u + v;
        x[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace crb::detail

#endif
