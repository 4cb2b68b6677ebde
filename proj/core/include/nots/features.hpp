#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nots/signal.hpp"

namespace nots {

struct FeatureSpec {
  int segment_length = 32;
  double ssc_threshold = 0.0;
  double wamp_threshold = 0.0;
  std::vector<std::pair<double, double>> bands = {{5.0, 10.0}, {15.0, 30.0}, {30.0, 80.0}};
  double sampling_rate = 128.0;

  // Validates band resolvability for the segment length; bands reaching past
  // Nyquist are truncated to fs/2 and the truncation is recorded.
  void validate() const;
  // Bands after Nyquist truncation, for metadata.
  std::vector<std::pair<double, double>> effective_bands() const;
};

// Per-segment slope-sign-change counts, one value per length-L segment.
std::vector<double> ssc(const std::vector<double>& channel, const FeatureSpec& spec);

// Per-segment Willison amplitude counts.
std::vector<double> wamp(const std::vector<double>& channel, const FeatureSpec& spec);

// Per-segment band powers, segment-major band-minor ordering
// (T/L segments x #bands values).
std::vector<double> band_power(const std::vector<double>& channel, const FeatureSpec& spec);

// Half of the median absolute consecutive difference over the dataset; the
// default SSC/WAMP threshold.
double default_threshold(const std::vector<LabeledSample>& dataset);

// task ids: "hurst", "ssc", "wamp", "band_power"
std::vector<double> feature_targets(const LabeledSample& sample, const FeatureSpec& spec,
                                    const std::string& which);

int feature_dim(const std::string& which, int signal_length, const FeatureSpec& spec);

}  // namespace nots
