#include "nots/tokenizer.hpp"

#include <cmath>
#include <stdexcept>

#include "nots/rng.hpp"

namespace nots {

int TokenizerConfig::total_stride() const {
  int s = 1;
  for (std::size_t i = 0; i < stage_widths.size(); ++i) s *= stage_stride;
  return s;
}

int TokenizerConfig::token_count(int T) const {
  int s = total_stride();
  if (T % s != 0)
    throw ShapeError("tokenizer: signal length " + std::to_string(T) +
                     " not divisible by total stride " + std::to_string(s));
  return T / s;
}

void TokenizerConfig::validate() const {
  if (stage_widths.empty()) throw std::invalid_argument("tokenizer: widths must be non-empty");
  if (token_dim < 1) throw std::invalid_argument("tokenizer: token dim must be >= 1");
  if (blocks_per_stage < 1 || stage_stride < 1 || kernel < 1 || first_kernel < 1)
    throw std::invalid_argument("tokenizer: config values must be positive");
}

namespace {

std::string key(const std::string& prefix, const std::string& rest) {
  return prefix + "." + rest;
}

void add_norm(ModelState& st, const std::string& name, int width) {
  Array g({width});
  for (double& v : g.data) v = 1.0;
  st.add(name + ".g", std::move(g));
  st.add(name + ".b", Array({width}));
}

struct BlockSpec {
  std::string name;
  int in_width, out_width, kernel1, stride;
};

void add_enc_block(ModelState& st, const BlockSpec& b, int kernel2, Rng& rng) {
  st.add(b.name + ".conv1.w",
         uniform_init({b.out_width, b.in_width, b.kernel1}, b.in_width * b.kernel1, rng));
  st.add(b.name + ".conv1.b", Array({b.out_width}));
  add_norm(st, b.name + ".norm1", b.out_width);
  st.add(b.name + ".conv2.w",
         uniform_init({b.out_width, b.out_width, kernel2}, b.out_width * kernel2, rng));
  st.add(b.name + ".conv2.b", Array({b.out_width}));
  add_norm(st, b.name + ".norm2", b.out_width);
  if (b.in_width != b.out_width || b.stride != 1) {
    st.add(b.name + ".proj.w", uniform_init({b.out_width, b.in_width, 1}, b.in_width, rng));
    st.add(b.name + ".proj.b", Array({b.out_width}));
  }
}

void add_dec_block(ModelState& st, const BlockSpec& b, int kernel2, Rng& rng) {
  // conv1 is transposed when the block upsamples; weight layout (Cin,Cout,k).
  if (b.stride != 1) {
    st.add(b.name + ".convt1.w",
           uniform_init({b.in_width, b.out_width, b.kernel1}, b.in_width * b.kernel1, rng));
  } else {
    st.add(b.name + ".conv1.w",
           uniform_init({b.out_width, b.in_width, b.kernel1}, b.in_width * b.kernel1, rng));
  }
  st.add(b.name + ".conv1.b", Array({b.out_width}));
  add_norm(st, b.name + ".norm1", b.out_width);
  st.add(b.name + ".conv2.w",
         uniform_init({b.out_width, b.out_width, kernel2}, b.out_width * kernel2, rng));
  st.add(b.name + ".conv2.b", Array({b.out_width}));
  add_norm(st, b.name + ".norm2", b.out_width);
  if (b.in_width != b.out_width || b.stride != 1) {
    if (b.stride != 1)
      st.add(b.name + ".projt.w", uniform_init({b.in_width, b.out_width, 1}, b.in_width, rng));
    else
      st.add(b.name + ".proj.w", uniform_init({b.out_width, b.in_width, 1}, b.in_width, rng));
    st.add(b.name + ".proj.b", Array({b.out_width}));
  }
}

VarId norm_affine(ParamContext& ctx, const std::string& name, VarId x) {
  Tape& t = ctx.tape();
  VarId y = ops::normalize_rows(t, x);
  y = ops::scale_rows(t, y, ctx[name + ".g"]);
  return ops::shift_rows(t, y, ctx[name + ".b"]);
}

// Residual encoder block: conv-norm-relu-conv-norm, additive skip, relu.
VarId enc_block(ParamContext& ctx, const std::string& name, VarId x, int stride,
                bool has_proj) {
  Tape& t = ctx.tape();
  VarId h = ops::conv1d(t, x, ctx[name + ".conv1.w"], stride, PadMode::Zero);
  h = ops::shift_rows(t, h, ctx[name + ".conv1.b"]);
  h = norm_affine(ctx, name + ".norm1", h);
  h = ops::relu(t, h);
  h = ops::conv1d(t, h, ctx[name + ".conv2.w"], 1, PadMode::Zero);
  h = ops::shift_rows(t, h, ctx[name + ".conv2.b"]);
  h = norm_affine(ctx, name + ".norm2", h);
  VarId skip = x;
  if (has_proj) {
    skip = ops::conv1d(t, x, ctx[name + ".proj.w"], stride, PadMode::Zero);
    skip = ops::shift_rows(t, skip, ctx[name + ".proj.b"]);
  }
  return ops::relu(t, ops::add(t, h, skip));
}

VarId dec_block(ParamContext& ctx, const std::string& name, VarId x, int stride,
                int out_len, bool has_proj) {
  Tape& t = ctx.tape();
  VarId h;
  if (stride != 1)
    h = ops::conv1d_transpose(t, x, ctx[name + ".convt1.w"], stride, out_len);
  else
    h = ops::conv1d(t, x, ctx[name + ".conv1.w"], 1, PadMode::Zero);
  h = ops::shift_rows(t, h, ctx[name + ".conv1.b"]);
  h = norm_affine(ctx, name + ".norm1", h);
  h = ops::relu(t, h);
  h = ops::conv1d(t, h, ctx[name + ".conv2.w"], 1, PadMode::Zero);
  h = ops::shift_rows(t, h, ctx[name + ".conv2.b"]);
  h = norm_affine(ctx, name + ".norm2", h);
  VarId skip = x;
  if (has_proj) {
    if (stride != 1)
      skip = ops::conv1d_transpose(t, x, ctx[name + ".projt.w"], stride, out_len);
    else
      skip = ops::conv1d(t, x, ctx[name + ".proj.w"], 1, PadMode::Zero);
    skip = ops::shift_rows(t, skip, ctx[name + ".proj.b"]);
  }
  return ops::relu(t, ops::add(t, h, skip));
}

}  // namespace

void init_tokenizer(ModelState& st, const TokenizerConfig& cfg, const std::string& prefix,
                    Rng& rng) {
  cfg.validate();
  const auto& w = cfg.stage_widths;
  for (std::size_t s = 0; s < w.size(); ++s) {
    for (int b = 0; b < cfg.blocks_per_stage; ++b) {
      BlockSpec bs;
      bs.name = key(prefix, "enc.s" + std::to_string(s) + ".b" + std::to_string(b));
      bs.in_width = (b == 0) ? (s == 0 ? 1 : w[s - 1]) : w[s];
      bs.out_width = w[s];
      bs.kernel1 = (s == 0 && b == 0) ? cfg.first_kernel : cfg.kernel;
      bs.stride = (b == 0) ? cfg.stage_stride : 1;
      add_enc_block(st, bs, cfg.kernel, rng);
    }
  }
  st.add(key(prefix, "enc.head.w"),
         uniform_init({cfg.token_dim, w.back(), 1}, w.back(), rng));
  st.add(key(prefix, "enc.head.b"), Array({cfg.token_dim}));

  st.add(key(prefix, "dec.head.w"),
         uniform_init({w.back(), cfg.token_dim, 1}, cfg.token_dim, rng));
  st.add(key(prefix, "dec.head.b"), Array({w.back()}));
  for (int s = static_cast<int>(w.size()) - 1; s >= 0; --s) {
    for (int b = 0; b < cfg.blocks_per_stage; ++b) {
      BlockSpec bs;
      bs.name = key(prefix, "dec.s" + std::to_string(s) + ".b" + std::to_string(b));
      bs.in_width = w[s];
      bs.out_width = (b == cfg.blocks_per_stage - 1) ? (s == 0 ? w[0] : w[s - 1]) : w[s];
      bs.kernel1 = cfg.kernel;
      bs.stride = (b == cfg.blocks_per_stage - 1) ? cfg.stage_stride : 1;
      add_dec_block(st, bs, cfg.kernel, rng);
    }
  }
  // Zero-initialized so the untrained reconstruction is the zero signal.
  st.add(key(prefix, "dec.out.w"), Array({1, w[0], cfg.first_kernel}));
  st.add(key(prefix, "dec.out.b"), Array({1}));
}

std::vector<VarId> encode(ParamContext& ctx, const TokenizerConfig& cfg,
                          const std::string& prefix, VarId signal) {
  Tape& t = ctx.tape();
  const Array& sv = t.value(signal);
  const int C = sv.rows();
  cfg.token_count(sv.cols());  // length check
  std::vector<VarId> out;
  for (int c = 0; c < C; ++c) {
    VarId x = (C == 1) ? signal : ops::slice_rows(t, signal, c, 1);
    for (std::size_t s = 0; s < cfg.stage_widths.size(); ++s)
      for (int b = 0; b < cfg.blocks_per_stage; ++b) {
        std::string name =
            key(prefix, "enc.s" + std::to_string(s) + ".b" + std::to_string(b));
        int stride = (b == 0) ? cfg.stage_stride : 1;
        int in_w = (b == 0) ? (s == 0 ? 1 : cfg.stage_widths[s - 1]) : cfg.stage_widths[s];
        bool proj = (in_w != cfg.stage_widths[s]) || stride != 1;
        x = enc_block(ctx, name, x, stride, proj);
      }
    x = ops::conv1d(t, x, ctx[key(prefix, "enc.head.w")], 1, PadMode::Zero);
    x = ops::shift_rows(t, x, ctx[key(prefix, "enc.head.b")]);
    out.push_back(ops::transpose(t, x));  // (G, d)
  }
  return out;
}

VarId decode(ParamContext& ctx, const TokenizerConfig& cfg, const std::string& prefix,
             const std::vector<VarId>& channel_tokens, int out_length) {
  Tape& t = ctx.tape();
  const int stages = static_cast<int>(cfg.stage_widths.size());
  std::vector<VarId> rows;
  for (VarId tokens : channel_tokens) {
    VarId x = ops::transpose(t, tokens);  // (d, G)
    x = ops::conv1d(t, x, ctx[key(prefix, "dec.head.w")], 1, PadMode::Zero);
    x = ops::shift_rows(t, x, ctx[key(prefix, "dec.head.b")]);
    for (int s = stages - 1; s >= 0; --s) {
      // Length after this stage: T / stride^s.
      int len = out_length;
      for (int i = 0; i < s; ++i) len /= cfg.stage_stride;
      for (int b = 0; b < cfg.blocks_per_stage; ++b) {
        std::string name =
            key(prefix, "dec.s" + std::to_string(s) + ".b" + std::to_string(b));
        bool last = (b == cfg.blocks_per_stage - 1);
        int in_w = cfg.stage_widths[s];
        int out_w = last ? (s == 0 ? cfg.stage_widths[0] : cfg.stage_widths[s - 1]) : in_w;
        int stride = last ? cfg.stage_stride : 1;
        bool proj = (in_w != out_w) || stride != 1;
        x = dec_block(ctx, name, x, stride, last ? len : 0, proj);
      }
    }
    x = ops::conv1d(t, x, ctx[key(prefix, "dec.out.w")], 1, PadMode::Zero);
    x = ops::shift_rows(t, x, ctx[key(prefix, "dec.out.b")]);
    rows.push_back(x);
  }
  return rows.size() == 1 ? rows[0] : ops::concat_rows(t, rows);
}

std::vector<TokenGroup> encode_signal(const ModelState& state, const TokenizerConfig& cfg,
                                      const std::string& prefix, const Signal& signal) {
  Tape t;
  ParamContext ctx(t, state);
  VarId sig = t.constant(signal);
  auto vars = encode(ctx, cfg, prefix, sig);
  std::vector<TokenGroup> out;
  for (std::size_t c = 0; c < vars.size(); ++c) {
    TokenGroup g;
    g.tokens = t.value(vars[c]);
    g.channel = static_cast<int>(c);
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace nots
