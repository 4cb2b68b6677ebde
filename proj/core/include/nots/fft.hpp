#pragma once

#include <complex>
#include <vector>

namespace nots {

// DFT of a real sequence, full length-N complex spectrum. Uses an iterative
// radix-2 FFT when N is a power of two and the O(N^2) direct sum otherwise.
std::vector<std::complex<double>> dft(const std::vector<double>& x);

// Inverse of dft(); returns the real part (callers check the imaginary
// residue where it matters).
std::vector<double> idft_real(const std::vector<std::complex<double>>& X);

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

}  // namespace nots
