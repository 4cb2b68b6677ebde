#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nots/adapt.hpp"
#include "nots/config.hpp"
#include "nots/dataset_io.hpp"
#include "nots/gradcheck.hpp"

namespace nots {

// Deterministic experiment report. Runtime is tracked but kept out of the
// serialized form so metrics.json is bit-identical across re-runs of the
// same config + seed.
struct MetricsReport {
  std::string name;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string dataset_checksum;
  double runtime_seconds = 0.0;
  std::vector<std::pair<std::string, double>> metrics;
  // Ablation table rows; stringified cells keep the output stable.
  std::vector<std::vector<std::pair<std::string, std::string>>> table;

  // Records `key` and the Table 1 readability companion `key`_x100.
  void add(const std::string& key, double value);
  double get(const std::string& key) const;

  std::string to_json() const;
  void write(const std::string& path) const;
};

// Fresh tokenizer ("tok") + transformer ("ar") parameters.
ModelState init_base_model(const ExperimentConfig& cfg, std::uint64_t seed);

// NoTS-family / baseline pre-training on the given signals.
FitHistory pretrain_fit(ModelState& state, const ExperimentConfig& cfg,
                        const std::vector<Signal>& signals);

// Pre-train (unless `base` is given), attach a frozen-base regression
// adaptor for cfg.task_target, tune on the 80/20 train split with z-scored
// targets, and report held-out MAE (raw and x100).
MetricsReport run_feature_regression(const ExperimentConfig& cfg, const DatasetFile& ds,
                                     const ModelState* base = nullptr,
                                     AdaptedModel* out_model = nullptr,
                                     FitHistory* out_history = nullptr);

// Column-complete masking at each configured ratio; reports MAE on masked
// columns only. A ratio that rounds to zero masked columns is rejected as a
// degenerate config.
MetricsReport run_imputation(const ExperimentConfig& cfg, const DatasetFile& ds,
                             const ModelState* base = nullptr);

// Reconstruction-error scoring with a train-percentile threshold and
// point-adjusted F1. The dataset must carry per-timestamp "anomaly" labels.
MetricsReport run_anomaly(const ExperimentConfig& cfg, const DatasetFile& ds,
                          const ModelState* base = nullptr);

// Copies `count` samples from `clean`, injecting a spike or level shift
// into each odd-indexed sample, and attaches per-timestamp "anomaly"
// labels (1 inside injected segments). The injection spec lands in the
// manifest's generation spec.
DatasetFile inject_anomalies(const DatasetFile& clean, int count, double amplitude,
                             std::uint64_t seed);

// Collects input token groups {R_k} and predictions {R'_k} for up to
// `max_samples` samples and writes the top-2 PCA projection CSV.
void pca_export(const ExperimentConfig& cfg, const ModelState& base,
                const DatasetFile& ds, const std::string& path, int max_samples = 16);

// The five Table 4 rows (drop consistency / no AR / no connection /
// gaussian degradation / full), each pre-trained and evaluated on the
// shared split with the shared seed.
MetricsReport run_ablation_matrix(const ExperimentConfig& cfg, const DatasetFile& ds,
                                  int jobs = 1);

// Central-difference check of every parameter of `state` through the full
// objective graph on one sample.
GradCheckReport model_grad_check(const ModelState& state, const TokenizerConfig& tok,
                                 const TransformerConfig& trans, const ObjectiveSpec& spec,
                                 const Signal& sample, double step = 1e-5,
                                 double tol = 1e-4);

// Op-level checks plus a full micro-model (tokenizer d=4, 1-layer 2-head
// transformer, T=16, K=3) finite-difference pass.
GradCheckReport run_gradcheck_suite(double tol = 1e-4);

// Point-adjusted F1: any flagged point inside a labeled segment counts the
// whole segment as detected. Exposed for testing.
double point_adjusted_f1(const std::vector<int>& flagged, const std::vector<int>& labels);

// Linear-interpolated percentile of a sample (q in [0,100]).
double percentile(std::vector<double> values, double q);

}  // namespace nots
