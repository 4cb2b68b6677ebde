#pragma once

#include <string>
#include <vector>

#include "nots/model.hpp"

namespace nots {

struct TransformerConfig {
  int layers = 3;
  int heads = 4;
  int token_dim = 32;
  int ff_mult = 4;
  int max_levels = 8;
  int max_channels = 8;
  int max_prompts = 16;
  double rotary_base = 10000.0;
  void validate() const;  // token_dim divisible by 2*heads, all positive
};

// Flat-sequence layout: per position, its degradation level (1-based),
// within-group index, and channel id. Prompt positions carry level -1 and
// attend / are attended globally.
struct GroupLayout {
  struct Entry {
    int level = 0;
    int within = 0;
    int channel = 0;
    bool is_prompt = false;
  };
  std::vector<Entry> pos;

  int size() const { return static_cast<int>(pos.size()); }
  int prompt_count() const;
  // Position range [start, start+len) of the group at `level` for `channel`.
  std::pair<int, int> extent(int level, int channel = 0) const;

  // Prompts first (if any), then groups in level order; within each level,
  // channels in order, G tokens each.
  static GroupLayout build(int num_levels, int channels, int group_size,
                           int prompts = 0);
  void validate() const;  // contiguous extents, levels non-decreasing
};

// Additive attention mask: M[q,s] = 0 when level(s) <= level(q) or either
// side is a prompt, else a large negative pre-softmax sentinel.
Array build_group_mask(const GroupLayout& layout, double neg = -1e9);

void init_transformer(ModelState& state, const TransformerConfig& cfg,
                      const std::string& prefix, Rng& rng);

// Adds degradation-level and channel embeddings to the data positions of an
// (S,d) token matrix. Prompt rows are left untouched.
VarId embed_sequence(ParamContext& ctx, const TransformerConfig& cfg,
                     const std::string& prefix, VarId tokens, const GroupLayout& layout,
                     bool use_channel_embeddings = true);

// Pre-norm transformer over the embedded sequence. When layer_prompts is
// non-empty (size == layers, each (P,d)), prompt rows are re-injected before
// every layer (deep prompting). Optional mask_override replaces the
// group-causal mask (used by the no-AR ablation).
VarId transformer_forward(ParamContext& ctx, const TransformerConfig& cfg,
                          const std::string& prefix, VarId x, const GroupLayout& layout,
                          const std::vector<VarId>& layer_prompts = {},
                          const Array* mask_override = nullptr);

}  // namespace nots
