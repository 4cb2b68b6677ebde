#pragma once

#include <string>
#include <vector>

#include "nots/adapt.hpp"
#include "nots/features.hpp"
#include "nots/objective.hpp"

namespace nots {

// Whole-experiment configuration, loadable from a JSON file. Unknown keys
// anywhere in the tree are errors.
struct ExperimentConfig {
  std::string dataset;     // dataset directory (manifest.json + payload.bin)
  std::string output_dir;  // empty = resolved by the caller (NOTS_OUT_DIR)
  std::uint64_t seed = 0;

  DegradationSchedule schedule;
  TokenizerConfig tokenizer;
  TransformerConfig transformer;
  ObjectiveSpec objective;  // objective.schedule mirrors `schedule`
  TrainConfig pretrain;
  TrainConfig tune;  // adaptor fitting; defaults to a short run
  TaskSpec task;
  std::string task_target = "hurst";  // feature id for regression targets
  int out_channels = 0;               // channel adaptor C'; 0 = dataset C
  FeatureSpec features;

  double train_fraction = 0.8;
  double anomaly_percentile = 99.0;
  std::vector<double> imputation_ratios = {0.125, 0.25};

  // Intra-config consistency (schedules, positive dims, matching token_dim).
  void validate() const;
  // Consistency against a concrete dataset shape; error text names the
  // violated divisor (tokenizer stride or feature segment length).
  void validate_for_dataset(int channels, int length) const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

// Canonical JSON (sorted keys, full precision) and its SHA-256. Equal
// configs hash equally regardless of source formatting.
std::string dump_config(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace nots
