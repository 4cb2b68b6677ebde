#pragma once

#include <cstdint>
#include <vector>

#include "nots/signal.hpp"

namespace nots {

enum class DegradeKind { LocalSmooth, GlobalSmooth, GaussianNoise };

struct DegradationOp {
  DegradeKind kind = DegradeKind::LocalSmooth;
  int window = 0;        // local-smooth: even positive p, kernel has p+1 taps
  double cutoff = 0.0;   // global-smooth: normalized frequency in (0, 0.5]
  double sigma = 0.0;    // gaussian-noise std
  std::uint64_t seed = 0;

  static DegradationOp local(int window);
  static DegradationOp global(double cutoff);
  static DegradationOp noise(double sigma, std::uint64_t seed);
};

// Ordered ops [d_1 .. d_{K-1}] plus an implicit identity at level K.
struct DegradationSchedule {
  std::vector<DegradationOp> ops;
  int levels() const { return static_cast<int>(ops.size()) + 1; }
  // Checks the monotone-information requirement: local windows strictly
  // decrease, global cutoffs strictly increase, noise sigmas strictly
  // decrease with k. Throws on violation or out-of-range parameters.
  void validate() const;

  static DegradationSchedule default_local();   // windows {64,32,16,8} + identity
  static DegradationSchedule default_global();  // cutoffs {1/64,1/32,1/16,1/8} + identity
  static DegradationSchedule default_noise(std::uint64_t seed);
};

// Shape-preserving; salt distinguishes noise draws across samples.
Signal apply(const DegradationOp& op, const Signal& signal, std::uint64_t salt = 0);

// [S_1 .. S_K]; every S_k is computed from the raw signal (not chained) and
// S_K is the signal itself.
std::vector<Signal> build_sequence(const DegradationSchedule& schedule,
                                   const Signal& signal, std::uint64_t salt = 0);

}  // namespace nots
