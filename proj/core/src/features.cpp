#include "nots/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nots/fft.hpp"

namespace nots {

namespace {

void require_divisible(std::size_t T, int L) {
  if (L <= 0 || T % static_cast<std::size_t>(L) != 0)
    throw std::invalid_argument("feature: signal length " + std::to_string(T) +
                                " not divisible by segment length " + std::to_string(L));
}

}  // namespace

std::vector<std::pair<double, double>> FeatureSpec::effective_bands() const {
  std::vector<std::pair<double, double>> out;
  const double nyquist = sampling_rate / 2.0;
  for (auto [lo, hi] : bands) out.emplace_back(lo, std::min(hi, nyquist));
  return out;
}

void FeatureSpec::validate() const {
  if (segment_length <= 0) throw std::invalid_argument("segment length must be positive");
  const double df = sampling_rate / segment_length;
  for (auto [lo, hi] : effective_bands()) {
    if (!(lo > 0.0 && lo < hi))
      throw std::invalid_argument("band [" + std::to_string(lo) + "," +
                                  std::to_string(hi) + "] is empty or starts at DC");
    bool has_bin = false;
    for (int m = 1; m <= segment_length / 2; ++m) {
      double f = m * df;
      if (f >= lo && f <= hi) { has_bin = true; break; }
    }
    if (!has_bin)
      throw std::invalid_argument("band [" + std::to_string(lo) + "," +
                                  std::to_string(hi) + "] contains no DFT bin at spacing " +
                                  std::to_string(df));
  }
}

std::vector<double> ssc(const std::vector<double>& channel, const FeatureSpec& spec) {
  const int L = spec.segment_length;
  require_divisible(channel.size(), L);
  const std::size_t segs = channel.size() / L;
  std::vector<double> out(segs, 0.0);
  for (std::size_t s = 0; s < segs; ++s) {
    const double* v = &channel[s * L];
    int count = 0;
    for (int i = 1; i < L - 1; ++i) {
      double d_prev = v[i] - v[i - 1];
      double d_next = v[i] - v[i + 1];
      if (d_prev * d_next < 0.0 &&
          std::max(std::abs(d_next), std::abs(d_prev)) >= spec.ssc_threshold)
        ++count;
    }
    out[s] = count;
  }
  return out;
}

std::vector<double> wamp(const std::vector<double>& channel, const FeatureSpec& spec) {
  const int L = spec.segment_length;
  require_divisible(channel.size(), L);
  const std::size_t segs = channel.size() / L;
  std::vector<double> out(segs, 0.0);
  for (std::size_t s = 0; s < segs; ++s) {
    const double* v = &channel[s * L];
    int count = 0;
    for (int i = 0; i < L - 1; ++i)
      if (std::abs(v[i + 1] - v[i]) >= spec.wamp_threshold) ++count;
    out[s] = count;
  }
  return out;
}

std::vector<double> band_power(const std::vector<double>& channel, const FeatureSpec& spec) {
  spec.validate();
  const int L = spec.segment_length;
  require_divisible(channel.size(), L);
  const std::size_t segs = channel.size() / L;
  const auto bands = spec.effective_bands();
  const double df = spec.sampling_rate / L;
  std::vector<double> out;
  out.reserve(segs * bands.size());
  for (std::size_t s = 0; s < segs; ++s) {
    std::vector<double> seg(channel.begin() + s * L, channel.begin() + (s + 1) * L);
    auto X = dft(seg);
    for (auto [lo, hi] : bands) {
      double p = 0.0;
      for (int m = 0; m <= L / 2; ++m) {
        double f = m * df;
        if (f >= lo && f <= hi) p += std::norm(X[m]);
      }
      out.push_back(p);
    }
  }
  return out;
}

double default_threshold(const std::vector<LabeledSample>& dataset) {
  std::vector<double> diffs;
  for (const auto& s : dataset) {
    const Signal& x = s.signal;
    for (int c = 0; c < x.rows(); ++c)
      for (int t = 1; t < x.cols(); ++t)
        diffs.push_back(std::abs(x.at(c, t) - x.at(c, t - 1)));
  }
  if (diffs.empty()) throw std::invalid_argument("default_threshold: empty dataset");
  std::nth_element(diffs.begin(), diffs.begin() + diffs.size() / 2, diffs.end());
  return 0.5 * diffs[diffs.size() / 2];
}

std::vector<double> feature_targets(const LabeledSample& sample, const FeatureSpec& spec,
                                    const std::string& which) {
  if (sample.signal.rows() != 1)
    throw std::invalid_argument("feature_targets: synthetic sets are single-channel");
  std::vector<double> ch(sample.signal.data);
  std::vector<double> out;
  if (which == "hurst") {
    auto it = sample.labels.find("hurst");
    if (it == sample.labels.end())
      throw std::invalid_argument("feature_targets: sample has no hurst label");
    out = it->second;
  } else if (which == "ssc") {
    out = ssc(ch, spec);
  } else if (which == "wamp") {
    out = wamp(ch, spec);
  } else if (which == "band_power") {
    out = band_power(ch, spec);
  } else {
    throw std::invalid_argument("feature_targets: unknown task id '" + which + "'");
  }
  const int want = feature_dim(which, sample.signal.cols(), spec);
  if (static_cast<int>(out.size()) != want)
    throw std::logic_error("feature_targets: dimensionality mismatch for " + which);
  return out;
}

int feature_dim(const std::string& which, int signal_length, const FeatureSpec& spec) {
  if (which == "hurst") return 1;
  const int segs = signal_length / spec.segment_length;
  if (which == "ssc" || which == "wamp") return segs;
  if (which == "band_power") return segs * static_cast<int>(spec.bands.size());
  throw std::invalid_argument("feature_dim: unknown task id '" + which + "'");
}

}  // namespace nots
