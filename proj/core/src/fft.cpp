#include "nots/fft.hpp"

#include <cmath>

namespace nots {

namespace {
bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }
}  // namespace

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse)
    for (auto& v : a) v /= static_cast<double>(n);
}

std::vector<std::complex<double>> dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (is_pow2(n)) {
    std::vector<std::complex<double>> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = x[i];
    fft_inplace(a, false);
    return a;
  }
  std::vector<std::complex<double>> X(n);
  for (std::size_t m = 0; m < n; ++m) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      double ang = -2.0 * M_PI * static_cast<double>(m * t) / static_cast<double>(n);
      acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    X[m] = acc;
  }
  return X;
}

std::vector<double> idft_real(const std::vector<std::complex<double>>& X) {
  const std::size_t n = X.size();
  std::vector<std::complex<double>> a = X;
  if (is_pow2(n)) {
    fft_inplace(a, true);
  } else {
    a.assign(n, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      std::complex<double> acc = 0.0;
      for (std::size_t m = 0; m < n; ++m) {
        double ang = 2.0 * M_PI * static_cast<double>(m * t) / static_cast<double>(n);
        acc += X[m] * std::complex<double>(std::cos(ang), std::sin(ang));
      }
      a[t] = acc / static_cast<double>(n);
    }
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i].real();
  return out;
}

}  // namespace nots
