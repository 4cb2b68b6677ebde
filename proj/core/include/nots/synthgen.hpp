#pragma once

#include <cstdint>
#include <vector>

#include "nots/signal.hpp"

namespace nots {

class Rng;

struct FbmSpec {
  int length = 1024;
  double hurst = 0.5;
  std::uint64_t seed = 0;
};

struct SinusoidSpec {
  int length = 1024;
  std::vector<int> component_counts = {20, 16, 10, 8, 4};  // each even; AR order B/2
  double noise_scale = 0.05;
  std::uint64_t seed = 0;
};

// Increment autocovariance of fractional Gaussian noise at lag i.
double fbm_gamma(int i, double hurst);

// Caches the Cholesky factor, which depends only on (length, hurst), so
// repeated draws cost O(N^2) instead of O(N^3).
class FbmGenerator {
 public:
  FbmGenerator(int length, double hurst);
  // Draws with the given seed. Non-finite outputs are rejected and
  // regenerated with seed+1 (mirrors the instability-removal step).
  LabeledSample generate(std::uint64_t seed) const;

  int length() const { return n_; }
  double hurst() const { return hurst_; }

 private:
  int n_;
  double hurst_;
  std::vector<double> chol_;  // lower-triangular, row-major packed
};

LabeledSample gen_fbm(const FbmSpec& spec);

// Frequency sequence of one AR(k) process: f_t = sum_i phi_i f_{t-i},
// seeded with init (size k), run out to total_count values, each clamped to
// [1, max_freq]. Throws if a frequency is non-positive after clamping or
// non-finite.
std::vector<double> ar_frequencies(const std::vector<double>& phi,
                                   const std::vector<double>& init,
                                   int total_count, double max_freq);

// sum_i (1/f_i) sin(2*pi*f_i*t/T + p_i) + noise_scale * N(0,1).
// Frequencies are DFT bin indices (cycles per window). rng may be null when
// noise_scale is 0.
Signal sinusoid_superposition(const std::vector<double>& freqs,
                              const std::vector<double>& phases, int length,
                              double noise_scale, Rng* rng);

LabeledSample gen_sinusoids(const SinusoidSpec& spec);

}  // namespace nots
