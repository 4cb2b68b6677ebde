#include "nots/armodel.hpp"

#include <cmath>
#include <stdexcept>

#include "nots/rng.hpp"

namespace nots {

void TransformerConfig::validate() const {
  if (layers < 1 || heads < 1 || token_dim < 1 || ff_mult < 1 || max_levels < 1 ||
      max_channels < 1 || max_prompts < 0)
    throw std::invalid_argument("transformer: config values must be positive");
  if (token_dim % (2 * heads) != 0)
    throw std::invalid_argument("transformer: token dim " + std::to_string(token_dim) +
                                " must be divisible by 2*heads = " +
                                std::to_string(2 * heads));
}

int GroupLayout::prompt_count() const {
  int n = 0;
  for (const auto& e : pos) n += e.is_prompt ? 1 : 0;
  return n;
}

std::pair<int, int> GroupLayout::extent(int level, int channel) const {
  int start = -1, len = 0;
  for (int i = 0; i < size(); ++i) {
    if (!pos[i].is_prompt && pos[i].level == level && pos[i].channel == channel) {
      if (start < 0) start = i;
      ++len;
    }
  }
  if (start < 0)
    throw std::out_of_range("GroupLayout: no group at level " + std::to_string(level) +
                            " channel " + std::to_string(channel));
  return {start, len};
}

GroupLayout GroupLayout::build(int num_levels, int channels, int group_size, int prompts) {
  GroupLayout l;
  for (int p = 0; p < prompts; ++p) l.pos.push_back({-1, p, 0, true});
  for (int k = 1; k <= num_levels; ++k)
    for (int c = 0; c < channels; ++c)
      for (int g = 0; g < group_size; ++g) l.pos.push_back({k, g, c, false});
  return l;
}

void GroupLayout::validate() const {
  int last_level = -1;
  for (const auto& e : pos) {
    if (e.is_prompt) continue;
    if (e.level < last_level)
      throw std::invalid_argument("GroupLayout: level ids must be non-decreasing");
    last_level = e.level;
  }
}

Array build_group_mask(const GroupLayout& layout, double neg) {
  layout.validate();
  const int S = layout.size();
  Array M({S, S});
  for (int q = 0; q < S; ++q)
    for (int s = 0; s < S; ++s) {
      const auto& eq = layout.pos[q];
      const auto& es = layout.pos[s];
      bool allowed = eq.is_prompt || es.is_prompt || es.level <= eq.level;
      M.at(q, s) = allowed ? 0.0 : neg;
    }
  return M;
}

namespace {

std::string key(const std::string& prefix, const std::string& rest) {
  return prefix + "." + rest;
}

void add_linear(ModelState& st, const std::string& name, int in, int out, Rng& rng,
                bool zero = false) {
  if (zero)
    st.add(name + ".w", Array({in, out}));
  else
    st.add(name + ".w", uniform_init({in, out}, in, rng));
  st.add(name + ".b", Array({out}));
}

void add_norm(ModelState& st, const std::string& name, int d) {
  Array g({d});
  for (double& v : g.data) v = 1.0;
  st.add(name + ".g", std::move(g));
  st.add(name + ".b", Array({d}));
}

VarId linear(ParamContext& ctx, const std::string& name, VarId x) {
  Tape& t = ctx.tape();
  VarId y = ops::matmul(t, x, ctx[name + ".w"]);
  return ops::shift_cols(t, y, ctx[name + ".b"]);
}

VarId norm_affine(ParamContext& ctx, const std::string& name, VarId x) {
  Tape& t = ctx.tape();
  VarId y = ops::normalize_rows(t, x);
  y = ops::scale_cols(t, y, ctx[name + ".g"]);
  return ops::shift_cols(t, y, ctx[name + ".b"]);
}

}  // namespace

void init_transformer(ModelState& st, const TransformerConfig& cfg,
                      const std::string& prefix, Rng& rng) {
  cfg.validate();
  const int d = cfg.token_dim;
  st.add(key(prefix, "deg_emb"), uniform_init({cfg.max_levels, d}, d, rng));
  st.add(key(prefix, "chan_emb"), uniform_init({cfg.max_channels, d}, d, rng));
  for (int l = 0; l < cfg.layers; ++l) {
    std::string lp = key(prefix, "layer" + std::to_string(l));
    add_norm(st, lp + ".ln1", d);
    add_linear(st, lp + ".q", d, d, rng);
    add_linear(st, lp + ".k", d, d, rng);
    add_linear(st, lp + ".v", d, d, rng);
    // Output projections start at zero so an untrained block is the
    // identity along the residual path.
    add_linear(st, lp + ".o", d, d, rng, /*zero=*/true);
    add_norm(st, lp + ".ln2", d);
    add_linear(st, lp + ".ff1", d, d * cfg.ff_mult, rng);
    add_linear(st, lp + ".ff2", d * cfg.ff_mult, d, rng, /*zero=*/true);
  }
}

VarId embed_sequence(ParamContext& ctx, const TransformerConfig& cfg,
                     const std::string& prefix, VarId tokens, const GroupLayout& layout,
                     bool use_channel_embeddings) {
  Tape& t = ctx.tape();
  const int S = layout.size();
  if (t.value(tokens).rows() != S)
    throw ShapeError("embed_sequence: layout size " + std::to_string(S) +
                     " vs tokens " + shape_str(t.value(tokens).shape));
  Array deg_onehot({S, cfg.max_levels});
  Array chan_onehot({S, cfg.max_channels});
  for (int i = 0; i < S; ++i) {
    const auto& e = layout.pos[i];
    if (e.is_prompt) continue;
    if (e.level < 1 || e.level > cfg.max_levels)
      throw std::out_of_range("embed_sequence: level " + std::to_string(e.level) +
                              " out of range [1," + std::to_string(cfg.max_levels) + "]");
    if (e.channel < 0 || e.channel >= cfg.max_channels)
      throw std::out_of_range("embed_sequence: channel " + std::to_string(e.channel) +
                              " out of range");
    deg_onehot.at(i, e.level - 1) = 1.0;
    chan_onehot.at(i, e.channel) = 1.0;
  }
  VarId x = ops::add(t, tokens,
                     ops::matmul(t, t.constant(deg_onehot), ctx[key(prefix, "deg_emb")]));
  if (use_channel_embeddings)
    x = ops::add(t, x,
                 ops::matmul(t, t.constant(chan_onehot), ctx[key(prefix, "chan_emb")]));
  return x;
}

VarId transformer_forward(ParamContext& ctx, const TransformerConfig& cfg,
                          const std::string& prefix, VarId x, const GroupLayout& layout,
                          const std::vector<VarId>& layer_prompts,
                          const Array* mask_override) {
  Tape& t = ctx.tape();
  cfg.validate();
  const int S = layout.size();
  const int P = layout.prompt_count();
  const int d = cfg.token_dim;
  const int dh = d / cfg.heads;
  if (!layer_prompts.empty() && static_cast<int>(layer_prompts.size()) != cfg.layers)
    throw std::invalid_argument("transformer_forward: need one prompt block per layer");

  Array mask = mask_override ? *mask_override : build_group_mask(layout);
  if (mask.rows() != S || mask.cols() != S)
    throw ShapeError("transformer_forward: mask " + shape_str(mask.shape) +
                     " vs sequence length " + std::to_string(S));
  VarId mask_c = t.constant(mask);

  std::vector<int> within(S);
  for (int i = 0; i < S; ++i) within[i] = layout.pos[i].within;

  for (int l = 0; l < cfg.layers; ++l) {
    if (!layer_prompts.empty() && P > 0) {
      // Deep prompting: prompt rows are replaced ahead of every layer.
      x = ops::concat_rows(t, {layer_prompts[l], ops::slice_rows(t, x, P, S - P)});
    }
    std::string lp = key(prefix, "layer" + std::to_string(l));
    VarId h = norm_affine(ctx, lp + ".ln1", x);
    VarId q = linear(ctx, lp + ".q", h);
    VarId k = linear(ctx, lp + ".k", h);
    VarId v = linear(ctx, lp + ".v", h);
    std::vector<VarId> heads;
    for (int hd = 0; hd < cfg.heads; ++hd) {
      VarId qh = ops::slice_cols(t, q, hd * dh, dh);
      VarId kh = ops::slice_cols(t, k, hd * dh, dh);
      VarId vh = ops::slice_cols(t, v, hd * dh, dh);
      qh = ops::rotary(t, qh, within, cfg.rotary_base);
      kh = ops::rotary(t, kh, within, cfg.rotary_base);
      VarId scores = ops::matmul(t, qh, ops::transpose(t, kh));
      scores = ops::scale(t, scores, 1.0 / std::sqrt(static_cast<double>(dh)));
      scores = ops::add(t, scores, mask_c);
      VarId attn = ops::softmax_rows(t, scores);
      heads.push_back(ops::matmul(t, attn, vh));
    }
    VarId merged = (heads.size() == 1) ? heads[0] : ops::concat_cols(t, heads);
    x = ops::add(t, x, linear(ctx, lp + ".o", merged));
    VarId h2 = norm_affine(ctx, lp + ".ln2", x);
    VarId ff = ops::relu(t, linear(ctx, lp + ".ff1", h2));
    x = ops::add(t, x, linear(ctx, lp + ".ff2", ff));
  }
  return x;
}

}  // namespace nots
