#include "nots/synthgen.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "nots/rng.hpp"

namespace nots {

double fbm_gamma(int i, double hurst) {
  double h2 = 2.0 * hurst;
  double a = std::pow(std::abs(static_cast<double>(i - 1)), h2);
  double b = std::pow(std::abs(static_cast<double>(i + 1)), h2);
  double c = std::pow(std::abs(static_cast<double>(i)), h2);
  return 0.5 * (a + b - 2.0 * c);
}

FbmGenerator::FbmGenerator(int length, double hurst) : n_(length), hurst_(hurst) {
  if (length < 2) throw std::invalid_argument("FbmGenerator: length must be >= 2");
  if (!(hurst > 0.0 && hurst < 1.0) && hurst != 0.5 && hurst != 1.0)
    throw std::invalid_argument("FbmGenerator: hurst must lie in (0,1)");
  const int n = n_;
  chol_.assign(static_cast<std::size_t>(n) * (n + 1) / 2, 0.0);
  auto L = [&](int i, int j) -> double& {
    return chol_[static_cast<std::size_t>(i) * (i + 1) / 2 + j];
  };
  L(0, 0) = 1.0;
  L(1, 0) = std::pow(2.0, 2.0 * hurst - 1.0) - 1.0;
  L(1, 1) = std::sqrt(1.0 - L(1, 0) * L(1, 0));
  for (int i = 2; i < n; ++i) {
    L(i, 0) = fbm_gamma(i, hurst);
    for (int j = 1; j < i; ++j) {
      double acc = 0.0;
      for (int k = 0; k < j; ++k) acc += L(i, k) * L(j, k);
      L(i, j) = (fbm_gamma(i - j, hurst) - acc) / L(j, j);
    }
    double diag = 1.0;
    for (int k = 0; k < i; ++k) diag -= L(i, k) * L(i, k);
    if (diag < -1e-9)
      throw std::runtime_error("FbmGenerator: Cholesky diagonal went negative (" +
                               std::to_string(diag) + ") at row " + std::to_string(i));
    L(i, i) = std::sqrt(diag > 0.0 ? diag : 0.0);
  }
}

LabeledSample FbmGenerator::generate(std::uint64_t seed) const {
  const int n = n_;
  const double rescale = std::pow(static_cast<double>(n), -hurst_);
  for (int attempt = 0; attempt < 100; ++attempt, ++seed) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    std::vector<double> incr(n);
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      const double* row = &chol_[static_cast<std::size_t>(i) * (i + 1) / 2];
      for (int k = 0; k <= i; ++k) acc += row[k] * v[k];
      incr[i] = acc;
    }
    Signal out({1, n});
    double run = 0.0;
    bool ok = true;
    for (int i = 0; i < n; ++i) {
      run += incr[i];
      out.data[i] = run * rescale;
      ok = ok && std::isfinite(out.data[i]);
    }
    if (!ok) continue;  // abnormal values: reject and reseed
    LabeledSample s;
    s.signal = std::move(out);
    s.labels["hurst"] = {hurst_};
    return s;
  }
  throw std::runtime_error("FbmGenerator: 100 consecutive draws rejected");
}

LabeledSample gen_fbm(const FbmSpec& spec) {
  FbmGenerator gen(spec.length, spec.hurst);
  return gen.generate(spec.seed);
}

std::vector<double> ar_frequencies(const std::vector<double>& phi,
                                   const std::vector<double>& init,
                                   int total_count, double max_freq) {
  const int k = static_cast<int>(phi.size());
  if (k == 0 || init.size() != phi.size())
    throw std::invalid_argument("ar_frequencies: |init| must equal AR order " +
                                std::to_string(k));
  std::vector<double> raw(init);
  raw.reserve(total_count);
  for (int t = k; t < total_count; ++t) {
    double f = 0.0;
    for (int i = 1; i <= k; ++i) f += phi[i - 1] * raw[t - i];
    if (!std::isfinite(f) || std::abs(f) > 1e8)
      throw std::runtime_error("ar_frequencies: AR recursion diverged at step " +
                               std::to_string(t));
    raw.push_back(f);
  }
  raw.resize(total_count);
  std::vector<double> out(raw);
  for (double& f : out) {
    f = std::min(std::max(f, 1.0), max_freq);
    if (f <= 0.0)
      throw std::runtime_error("ar_frequencies: non-positive frequency after clamping");
  }
  return out;
}

Signal sinusoid_superposition(const std::vector<double>& freqs,
                              const std::vector<double>& phases, int length,
                              double noise_scale, Rng* rng) {
  if (freqs.size() != phases.size())
    throw std::invalid_argument("sinusoid_superposition: freqs/phases size mismatch");
  Signal out({1, length});
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    double a = 1.0 / freqs[i];
    for (int t = 0; t < length; ++t)
      out.data[t] += a * std::sin(2.0 * M_PI * freqs[i] * t / length + phases[i]);
  }
  if (noise_scale > 0.0) {
    if (rng == nullptr)
      throw std::invalid_argument("sinusoid_superposition: rng required for noise");
    for (int t = 0; t < length; ++t) out.data[t] += noise_scale * rng->normal();
  }
  return out;
}

LabeledSample gen_sinusoids(const SinusoidSpec& spec) {
  if (spec.length < 4) throw std::invalid_argument("gen_sinusoids: length too short");
  for (int b : spec.component_counts)
    if (b <= 0 || b % 2 != 0)
      throw std::invalid_argument("gen_sinusoids: component counts must be positive even");
  if (spec.noise_scale < 0.0)
    throw std::invalid_argument("gen_sinusoids: noise scale must be >= 0");

  Rng rng(spec.seed);
  const int pick = static_cast<int>(rng.below(spec.component_counts.size()));
  const int B = spec.component_counts[pick];
  const int k = B / 2;
  const double max_freq = spec.length / 2.0 - 1.0;

  std::vector<double> freqs;
  // phi is re-drawn per initialization; regenerate on AR divergence.
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<double> init(k), phi(k);
    for (double& f : init) f = rng.uniform(2.0, 64.0);
    for (double& p : phi) p = rng.uniform(-0.5 / k, 1.5 / k);
    try {
      freqs = ar_frequencies(phi, init, B, max_freq);
      break;
    } catch (const std::runtime_error&) {
      continue;
    }
  }
  if (freqs.empty()) throw std::runtime_error("gen_sinusoids: AR process kept diverging");

  std::vector<double> phases(B);
  for (double& p : phases) p = 2.0 * M_PI * (1.0 - rng.uniform());  // (0, 2*pi]

  LabeledSample s;
  s.signal = sinusoid_superposition(freqs, phases, spec.length, spec.noise_scale, &rng);
  return s;
}

}  // namespace nots
