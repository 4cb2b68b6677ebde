#include "nots/degrade.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "nots/fft.hpp"
#include "nots/rng.hpp"

namespace nots {

DegradationOp DegradationOp::local(int window) {
  if (window <= 0 || window % 2 != 0)
    throw std::invalid_argument("local-smooth window must be a positive even integer");
  DegradationOp op;
  op.kind = DegradeKind::LocalSmooth;
  op.window = window;
  return op;
}

DegradationOp DegradationOp::global(double cutoff) {
  if (!(cutoff > 0.0 && cutoff <= 0.5))
    throw std::invalid_argument("global-smooth cutoff must lie in (0, 0.5]");
  DegradationOp op;
  op.kind = DegradeKind::GlobalSmooth;
  op.cutoff = cutoff;
  return op;
}

DegradationOp DegradationOp::noise(double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("gaussian-noise sigma must be >= 0");
  DegradationOp op;
  op.kind = DegradeKind::GaussianNoise;
  op.sigma = sigma;
  op.seed = seed;
  return op;
}

void DegradationSchedule::validate() const {
  if (ops.empty())
    throw std::invalid_argument("schedule needs at least one op (K >= 2)");
  for (std::size_t i = 1; i < ops.size(); ++i) {
    const DegradationOp& a = ops[i - 1];
    const DegradationOp& b = ops[i];
    if (a.kind != b.kind)
      throw std::invalid_argument("schedule mixes degradation kinds");
    bool ok = true;
    switch (a.kind) {
      case DegradeKind::LocalSmooth: ok = b.window < a.window; break;
      case DegradeKind::GlobalSmooth: ok = b.cutoff > a.cutoff; break;
      case DegradeKind::GaussianNoise: ok = b.sigma < a.sigma; break;
    }
    if (!ok)
      throw std::invalid_argument(
          "schedule violates monotone information at level " + std::to_string(i + 1));
  }
}

DegradationSchedule DegradationSchedule::default_local() {
  DegradationSchedule s;
  for (int w : {64, 32, 16, 8}) s.ops.push_back(DegradationOp::local(w));
  return s;
}

DegradationSchedule DegradationSchedule::default_global() {
  DegradationSchedule s;
  for (double c : {1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8})
    s.ops.push_back(DegradationOp::global(c));
  return s;
}

DegradationSchedule DegradationSchedule::default_noise(std::uint64_t seed) {
  DegradationSchedule s;
  int i = 0;
  for (double sig : {1.0, 0.5, 0.25, 0.125})
    s.ops.push_back(DegradationOp::noise(sig, seed + i++));
  return s;
}

namespace {

inline int reflect_index(int i, int n) {
  if (i < 0) i = -i;
  if (i >= n) i = 2 * n - 2 - i;
  return i;
}

Signal local_smooth(const Signal& x, int p) {
  const int C = x.rows(), T = x.cols();
  if (p + 1 > T)
    throw std::invalid_argument("local-smooth window " + std::to_string(p + 1) +
                                " longer than signal " + std::to_string(T));
  const int half = p / 2;
  const double w = 1.0 / (p + 1);
  Signal y({C, T});
  for (int c = 0; c < C; ++c)
    for (int t = 0; t < T; ++t) {
      double acc = 0.0;
      for (int j = -half; j <= half; ++j) acc += x.at(c, reflect_index(t + j, T));
      y.at(c, t) = acc * w;
    }
  return y;
}

Signal global_smooth(const Signal& x, double cutoff) {
  const int C = x.rows(), T = x.cols();
  Signal y({C, T});
  for (int c = 0; c < C; ++c) {
    std::vector<double> row(T);
    for (int t = 0; t < T; ++t) row[t] = x.at(c, t);
    auto X = dft(row);
    for (int m = 1; m < T; ++m) {
      double f = static_cast<double>(std::min(m, T - m)) / T;
      if (f > cutoff) X[m] = 0.0;
    }
    auto back = idft_real(X);
    for (int t = 0; t < T; ++t) y.at(c, t) = back[t];
  }
  return y;
}

}  // namespace

Signal apply(const DegradationOp& op, const Signal& signal, std::uint64_t salt) {
  if (signal.rank() != 2)
    throw std::invalid_argument("apply: signal must be C x T, got " +
                                shape_str(signal.shape));
  switch (op.kind) {
    case DegradeKind::LocalSmooth:
      return local_smooth(signal, op.window);
    case DegradeKind::GlobalSmooth:
      return global_smooth(signal, op.cutoff);
    case DegradeKind::GaussianNoise: {
      Rng rng(op.seed ^ (salt * 0x9e3779b97f4a7c15ULL + 1));
      Signal y = signal;
      for (double& v : y.data) v += op.sigma * rng.normal();
      return y;
    }
  }
  throw std::logic_error("unhandled degradation kind");
}

std::vector<Signal> build_sequence(const DegradationSchedule& schedule,
                                   const Signal& signal, std::uint64_t salt) {
  schedule.validate();
  std::vector<Signal> out;
  out.reserve(schedule.levels());
  for (std::size_t i = 0; i < schedule.ops.size(); ++i)
    out.push_back(apply(schedule.ops[i], signal, salt + i));
  out.push_back(signal);
  return out;
}

}  // namespace nots
