#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "nots/armodel.hpp"
#include "nots/degrade.hpp"
#include "nots/model.hpp"
#include "nots/tokenizer.hpp"

namespace nots {

enum class ObjectiveKind {
  Nots,
  NotsNoConsistency,
  NonArConnected,
  AugmentOnly,
  NextPeriod,
  MaskedRecon,
};

ObjectiveKind objective_kind_from_string(const std::string& s);
std::string objective_kind_name(ObjectiveKind k);

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::Nots;
  DegradationSchedule schedule;  // nots family
  int period_length = 128;       // next-period baseline
  double mask_ratio = 0.25;      // masked-recon baseline
  bool ar_target_next = true;    // next-level targets; false = literal same-level
  void validate(int signal_length) const;
};

struct TrainConfig {
  double lr = 0.05;
  std::vector<int> milestones = {30, 150};
  double lr_factor = 0.3;
  int epochs = 300;
  int batch_size = 64;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double weight_decay = 1e-5;
  std::uint64_t seed = 0;
  std::string precision = "f64";
  void validate() const;
};

double lr_at_epoch(const TrainConfig& cfg, int epoch);

// Loss graph for one sample of the nots family. The raw-signal level S_K
// never enters the transformer; its encoding feeds only the consistency
// term.
struct NotsGraph {
  VarId loss = -1;
  std::vector<VarId> ar_terms;
  VarId consistency = -1;  // -1 when the variant drops it
  GroupLayout layout;
  std::vector<std::vector<VarId>> input_groups;      // [level k-1][channel]
  std::vector<std::vector<VarId>> predicted_groups;  // [target level-2][channel]
  std::vector<VarId> predicted_signals;              // S'_2 .. S'_K
};

NotsGraph build_nots_graph(ParamContext& ctx, const TokenizerConfig& tok,
                           const TransformerConfig& trans,
                           const std::vector<Signal>& sequence, ObjectiveKind variant,
                           bool ar_target_next = true);

// Next-period baseline: signal sliced into T/L periods, each encoded as one
// group, standard causal group mask, period p+1 predicted from periods <= p.
struct BaselineGraph {
  VarId loss = -1;
  std::vector<VarId> terms;
  bool degenerate = false;  // single-period next-period config
};

BaselineGraph build_next_period_graph(ParamContext& ctx, const TokenizerConfig& tok,
                                      const TransformerConfig& trans, const Signal& sample,
                                      int period_length);

BaselineGraph build_masked_recon_graph(ParamContext& ctx, const TokenizerConfig& tok,
                                       const TransformerConfig& trans, const Signal& sample,
                                       double mask_ratio, std::uint64_t seed);

// One sample's evaluated loss with gradients.
struct SampleLoss {
  double total = 0.0;
  std::vector<double> terms;
  std::map<std::string, Array> grads;
};

SampleLoss objective_loss(const ModelState& state, const TokenizerConfig& tok,
                          const TransformerConfig& trans, const ObjectiveSpec& spec,
                          const Signal& sample, std::uint64_t salt,
                          bool with_grads = true);

// Adam with bias correction and decoupled weight decay; frozen parameters
// are never touched.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(const TrainConfig& cfg) : cfg_(cfg) {}
  void step(ModelState& state, const std::map<std::string, Array>& grads, double lr);

 private:
  TrainConfig cfg_;
  int t_ = 0;
  std::map<std::string, Array> m_, v_;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
  std::vector<double> mean_terms;
};

struct FitHistory {
  std::vector<EpochRecord> records;
  void write_csv(const std::string& path) const;
};

// Per-sample loss callback; `index` addresses the caller's dataset.
using LossBuilder =
    std::function<SampleLoss(const ModelState& state, std::size_t index)>;

// Seeded shuffled mini-batches, one optimizer step per batch, MultiStep lr
// decay. Aborts on a non-finite loss naming the epoch and batch.
FitHistory fit(ModelState& state, const TrainConfig& cfg, std::size_t num_samples,
               const LossBuilder& builder);

}  // namespace nots
