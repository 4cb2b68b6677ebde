#pragma once

#include <string>
#include <vector>

#include "nots/model.hpp"
#include "nots/signal.hpp"

namespace nots {

struct TokenizerConfig {
  std::vector<int> stage_widths = {16, 32, 64};
  int blocks_per_stage = 2;
  int first_kernel = 7;
  int kernel = 3;
  int token_dim = 32;
  int stage_stride = 2;

  int total_stride() const;
  // G = T / total_stride; throws naming the required divisor when T does
  // not divide.
  int token_count(int T) const;
  void validate() const;
};

struct TokenGroup {
  Array tokens;  // (G, d)
  int level = 0;
  int channel = 0;
  int sample = 0;
};

// Registers encoder+decoder parameters under `prefix`. The final decoder
// conv is zero-initialized so the initial reconstruction is the zero signal.
void init_tokenizer(ModelState& state, const TokenizerConfig& cfg,
                    const std::string& prefix, Rng& rng);

// Channel-independent encode: each row of the (C,T) signal passes through
// the same stack; returns one (G,d) token matrix per channel.
std::vector<VarId> encode(ParamContext& ctx, const TokenizerConfig& cfg,
                          const std::string& prefix, VarId signal);

// Decode per-channel token groups back to a (C,T) signal.
VarId decode(ParamContext& ctx, const TokenizerConfig& cfg, const std::string& prefix,
             const std::vector<VarId>& channel_tokens, int out_length);

// Tape-free convenience for inference paths.
std::vector<TokenGroup> encode_signal(const ModelState& state, const TokenizerConfig& cfg,
                                      const std::string& prefix, const Signal& signal);

}  // namespace nots
