#include "prosody/fft.hpp"

#include <cmath>
#include <cstddef>

namespace prosody {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Iterative radix-2 Cooley-Tukey, n must be a power of two.
void fft_pow2(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& v : a) v *= inv;
  }
}

// Bluestein's algorithm: express the length-n DFT as a convolution that a
// power-of-two FFT can evaluate.
void fft_bluestein(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  const std::size_t m = next_pow2(2 * n - 1);
  std::vector<std::complex<double>> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    // angle = pi * k^2 / n, k^2 reduced mod 2n to keep precision
    const std::size_t k2 = (k * k) % (2 * n);
    const double ang = (inverse ? 1.0 : -1.0) * kPi *
                       static_cast<double>(k2) / static_cast<double>(n);
    w[k] = std::complex<double>(std::cos(ang), std::sin(ang));
  }
  std::vector<std::complex<double>> x(m), y(m);
  for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * w[k];
  y[0] = std::conj(w[0]);
  for (std::size_t k = 1; k < n; ++k) {
    y[k] = std::conj(w[k]);
    y[m - k] = std::conj(w[k]);
  }
  fft_pow2(x, false);
  fft_pow2(y, false);
  for (std::size_t k = 0; k < m; ++k) x[k] *= y[k];
  fft_pow2(x, true);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * w[k];
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& v : a) v *= inv;
  }
}

}  // namespace

void fft(std::vector<std::complex<double>>& data, bool inverse) {
  if (data.size() <= 1) return;
  if (is_pow2(data.size())) {
    fft_pow2(data, inverse);
  } else {
    fft_bluestein(data, inverse);
  }
}

std::vector<std::complex<double>> rfft(const std::vector<double>& x, int n) {
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(n));
  const std::size_t copy = std::min(x.size(), static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < copy; ++i) buf[i] = x[i];
  fft(buf, false);
  buf.resize(static_cast<std::size_t>(n) / 2 + 1);
  return buf;
}

std::vector<double> fft_convolve(const std::vector<double>& x,
                                 const std::vector<double>& h) {
  const std::size_t out_len = x.size() + h.size() - 1;
  const std::size_t m = next_pow2(out_len);
  std::vector<std::complex<double>> a(m), b(m);
  for (std::size_t i = 0; i < x.size(); ++i) a[i] = x[i];
  for (std::size_t i = 0; i < h.size(); ++i) b[i] = h[i];
  fft(a, false);
  fft(b, false);
  for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
  fft(a, true);
  std::vector<double> out(out_len);
  for (std::size_t i = 0; i < out_len; ++i) out[i] = a[i].real();
  return out;
}

}  // namespace prosody
