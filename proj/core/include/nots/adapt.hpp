#pragma once

#include <string>
#include <vector>

#include "nots/degrade.hpp"
#include "nots/objective.hpp"

namespace nots {

struct ChannelAdaptorSpec {
  int in_channels = 1;
  int out_channels = 1;  // C'
};

enum class TaskKind { Regression, Classification, Imputation, Anomaly };

TaskKind task_kind_from_string(const std::string& s);

struct TaskSpec {
  TaskKind kind = TaskKind::Regression;
  int output_dim = 1;  // regression dim or number of classes
  int prompts = 8;     // P prompt tokens per layer
};

struct ParamPartition {
  std::size_t frozen = 0;
  std::size_t trainable = 0;
  double trainable_fraction() const {
    return static_cast<double>(trainable) / static_cast<double>(frozen + trainable);
  }
};

// Frozen base + trainable adaptors. The mixing matrix applies the same
// channel map at every timestamp; degradation operators act per channel, so
// degrading first and mixing on-tape matches mixing first for the linear
// smoothing operators.
struct AdaptedModel {
  TokenizerConfig tok;
  TransformerConfig trans;
  DegradationSchedule schedule;
  ChannelAdaptorSpec channel;
  TaskSpec task;
  ModelState state;  // base (frozen when requested) + "adapt." parameters
  ParamPartition partition() const;
};

AdaptedModel attach_adaptors(const ModelState& base, const TokenizerConfig& tok,
                             const TransformerConfig& trans,
                             const DegradationSchedule& schedule,
                             const ChannelAdaptorSpec& channel, const TaskSpec& task,
                             bool freeze_base, std::uint64_t seed);

struct AdaptedForward {
  VarId task_output = -1;    // (1, output_dim) for regression/classification
  VarId reconstruction = -1; // (C', T) decoded final predicted group
};

AdaptedForward adapted_forward(ParamContext& ctx, const AdaptedModel& model,
                               const Signal& sample);

// Inference helpers (tape-free callers).
std::vector<double> predict_regression(const AdaptedModel& model, const Signal& sample);
int predict_class(const AdaptedModel& model, const Signal& sample);
Signal reconstruct(const AdaptedModel& model, const Signal& sample);
// Per-timestamp mean absolute error between input and reconstruction.
std::vector<double> anomaly_scores(const AdaptedModel& model, const Signal& sample);

// Optimizes only the trainable partition. For regression/imputation the
// loss is mae; classification uses cross-entropy. targets[i]: regression
// vector, or {class index}.
FitHistory tune(AdaptedModel& model, const std::vector<Signal>& inputs,
                const std::vector<std::vector<double>>& targets, const TrainConfig& cfg);

}  // namespace nots
