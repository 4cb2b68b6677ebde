#include "nots/objective.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "nots/rng.hpp"

namespace nots {

ObjectiveKind objective_kind_from_string(const std::string& s) {
  if (s == "nots") return ObjectiveKind::Nots;
  if (s == "nots-no-consistency") return ObjectiveKind::NotsNoConsistency;
  if (s == "nonar-connected") return ObjectiveKind::NonArConnected;
  if (s == "augment-only") return ObjectiveKind::AugmentOnly;
  if (s == "next-period") return ObjectiveKind::NextPeriod;
  if (s == "masked-recon") return ObjectiveKind::MaskedRecon;
  throw std::invalid_argument("unknown objective kind '" + s + "'");
}

std::string objective_kind_name(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::Nots: return "nots";
    case ObjectiveKind::NotsNoConsistency: return "nots-no-consistency";
    case ObjectiveKind::NonArConnected: return "nonar-connected";
    case ObjectiveKind::AugmentOnly: return "augment-only";
    case ObjectiveKind::NextPeriod: return "next-period";
    case ObjectiveKind::MaskedRecon: return "masked-recon";
  }
  return "?";
}

void ObjectiveSpec::validate(int signal_length) const {
  switch (kind) {
    case ObjectiveKind::Nots:
    case ObjectiveKind::NotsNoConsistency:
    case ObjectiveKind::NonArConnected:
    case ObjectiveKind::AugmentOnly:
      schedule.validate();
      break;
    case ObjectiveKind::NextPeriod:
      if (period_length <= 0 || signal_length % period_length != 0)
        throw std::invalid_argument("next-period: signal length " +
                                    std::to_string(signal_length) +
                                    " not divisible by period length " +
                                    std::to_string(period_length));
      break;
    case ObjectiveKind::MaskedRecon:
      if (!(mask_ratio >= 0.0 && mask_ratio < 1.0))
        throw std::invalid_argument("masked-recon: mask ratio must lie in [0,1)");
      break;
  }
}

void TrainConfig::validate() const {
  if (lr <= 0.0 || epochs <= 0 || batch_size <= 0)
    throw std::invalid_argument("train config: lr, epochs, batch size must be positive");
  if (precision != "f64")
    throw std::invalid_argument("train config: precision '" + precision +
                                "' unsupported (only f64)");
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  double lr = cfg.lr;
  for (int m : cfg.milestones)
    if (epoch >= m) lr *= cfg.lr_factor;
  return lr;
}

NotsGraph build_nots_graph(ParamContext& ctx, const TokenizerConfig& tok,
                           const TransformerConfig& trans,
                           const std::vector<Signal>& sequence, ObjectiveKind variant,
                           bool ar_target_next) {
  if (sequence.size() < 2)
    throw std::invalid_argument("nots loss: need at least 2 levels");
  Tape& t = ctx.tape();
  const int K = static_cast<int>(sequence.size());
  const int C = sequence[0].rows();
  const int T = sequence[0].cols();
  const int G = tok.token_count(T);
  const bool consistency =
      (variant == ObjectiveKind::Nots || variant == ObjectiveKind::NonArConnected);

  NotsGraph g;

  if (variant == ObjectiveKind::AugmentOnly) {
    // Encoder/decoder autoencoding of every level; the transformer is
    // bypassed entirely.
    VarId total = -1;
    for (int k = 0; k < K; ++k) {
      VarId sig = t.constant(sequence[k]);
      auto groups = encode(ctx, tok, "tok", sig);
      VarId rec = decode(ctx, tok, "tok", groups, T);
      VarId term = ops::mae(t, rec, sig);
      g.ar_terms.push_back(term);
      total = (total < 0) ? term : ops::add(t, total, term);
    }
    g.loss = total;
    return g;
  }

  // Encode S_1 .. S_{K-1} for the transformer; S_K feeds only the
  // consistency term.
  std::vector<VarId> flat_parts;
  for (int k = 1; k < K; ++k) {
    VarId sig = t.constant(sequence[k - 1]);
    auto groups = encode(ctx, tok, "tok", sig);
    g.input_groups.push_back(groups);
    for (VarId gr : groups) flat_parts.push_back(gr);
  }
  g.layout = GroupLayout::build(K - 1, C, G);
  VarId flat = (flat_parts.size() == 1) ? flat_parts[0] : ops::concat_rows(t, flat_parts);
  VarId emb = embed_sequence(ctx, trans, "ar", flat, g.layout, C > 1);

  Array full_attention;
  const Array* mask_override = nullptr;
  if (variant == ObjectiveKind::NonArConnected) {
    full_attention = Array({g.layout.size(), g.layout.size()});
    mask_override = &full_attention;
  }
  VarId out = transformer_forward(ctx, trans, "ar", emb, g.layout, {}, mask_override);

  VarId total = -1;
  for (int k = 1; k < K; ++k) {
    std::vector<VarId> pred_tokens;
    for (int c = 0; c < C; ++c) {
      auto [start, len] = g.layout.extent(k, c);
      pred_tokens.push_back(ops::slice_rows(t, out, start, len));
    }
    g.predicted_groups.push_back(pred_tokens);
    VarId rec = decode(ctx, tok, "tok", pred_tokens, T);
    g.predicted_signals.push_back(rec);
    const Signal* target;
    if (variant == ObjectiveKind::NonArConnected) {
      target = &sequence[k - 1];  // own slot
    } else {
      target = ar_target_next ? &sequence[k] : &sequence[k - 1];
    }
    VarId term = ops::mae(t, rec, t.constant(*target));
    g.ar_terms.push_back(term);
    total = (total < 0) ? term : ops::add(t, total, term);
  }

  if (consistency) {
    VarId raw = t.constant(sequence[K - 1]);
    auto groups = encode(ctx, tok, "tok", raw);
    VarId rec = decode(ctx, tok, "tok", groups, T);
    g.consistency = ops::mae(t, rec, raw);
    total = ops::add(t, total, g.consistency);
  }
  g.loss = total;
  return g;
}

BaselineGraph build_next_period_graph(ParamContext& ctx, const TokenizerConfig& tok,
                                      const TransformerConfig& trans, const Signal& sample,
                                      int period_length) {
  Tape& t = ctx.tape();
  const int C = sample.rows();
  const int T = sample.cols();
  if (period_length <= 0 || T % period_length != 0)
    throw std::invalid_argument("next-period: T not divisible by period length");
  const int P = T / period_length;
  const int G = tok.token_count(period_length);

  BaselineGraph b;
  if (P == 1) {
    b.degenerate = true;
    std::cerr << "[nots] warning: next-period with a single period is degenerate; "
                 "falling back to plain autoencoding\n";
    VarId sig = t.constant(sample);
    auto groups = encode(ctx, tok, "tok", sig);
    VarId rec = decode(ctx, tok, "tok", groups, T);
    b.loss = ops::mae(t, rec, sig);
    b.terms.push_back(b.loss);
    return b;
  }

  std::vector<Signal> periods;
  for (int p = 0; p < P; ++p) {
    Signal seg({C, period_length});
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < period_length; ++i)
        seg.at(c, i) = sample.at(c, p * period_length + i);
    periods.push_back(std::move(seg));
  }

  std::vector<VarId> flat_parts;
  for (int p = 0; p < P; ++p) {
    auto groups = encode(ctx, tok, "tok", t.constant(periods[p]));
    for (VarId gr : groups) flat_parts.push_back(gr);
  }
  GroupLayout layout = GroupLayout::build(P, C, G);
  VarId flat = (flat_parts.size() == 1) ? flat_parts[0] : ops::concat_rows(t, flat_parts);
  VarId emb = embed_sequence(ctx, trans, "ar", flat, layout, C > 1);
  VarId out = transformer_forward(ctx, trans, "ar", emb, layout);

  VarId total = -1;
  for (int p = 1; p < P; ++p) {
    std::vector<VarId> pred;
    for (int c = 0; c < C; ++c) {
      auto [start, len] = layout.extent(p, c);
      pred.push_back(ops::slice_rows(t, out, start, len));
    }
    VarId rec = decode(ctx, tok, "tok", pred, period_length);
    VarId term = ops::mae(t, rec, t.constant(periods[p]));
    b.terms.push_back(term);
    total = (total < 0) ? term : ops::add(t, total, term);
  }
  b.loss = total;
  return b;
}

BaselineGraph build_masked_recon_graph(ParamContext& ctx, const TokenizerConfig& tok,
                                       const TransformerConfig& trans, const Signal& sample,
                                       double mask_ratio, std::uint64_t seed) {
  Tape& t = ctx.tape();
  const int C = sample.rows();
  const int T = sample.cols();
  const int G = tok.token_count(T);

  VarId sig = t.constant(sample);
  auto groups = encode(ctx, tok, "tok", sig);

  // Zero a seeded random fraction of token positions.
  Rng rng(seed);
  Array keep({G, tok.token_dim});
  int masked = static_cast<int>(std::llround(mask_ratio * G));
  std::vector<int> idx(G);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = G - 1; i > 0; --i) std::swap(idx[i], idx[rng.below(i + 1)]);
  for (int g2 = 0; g2 < G; ++g2) {
    bool drop = false;
    for (int j = 0; j < masked; ++j) drop = drop || (idx[j] == g2);
    for (int d = 0; d < tok.token_dim; ++d) keep.at(g2, d) = drop ? 0.0 : 1.0;
  }
  VarId keep_c = t.constant(keep);

  std::vector<VarId> flat_parts;
  for (VarId gr : groups) flat_parts.push_back(ops::mul(t, gr, keep_c));
  GroupLayout layout = GroupLayout::build(1, C, G);
  VarId flat = (flat_parts.size() == 1) ? flat_parts[0] : ops::concat_rows(t, flat_parts);
  VarId emb = embed_sequence(ctx, trans, "ar", flat, layout, C > 1);
  Array full_attention({layout.size(), layout.size()});
  VarId out = transformer_forward(ctx, trans, "ar", emb, layout, {}, &full_attention);

  std::vector<VarId> pred;
  for (int c = 0; c < C; ++c) {
    auto [start, len] = layout.extent(1, c);
    pred.push_back(ops::slice_rows(t, out, start, len));
  }
  VarId rec = decode(ctx, tok, "tok", pred, T);
  BaselineGraph b;
  b.loss = ops::mae(t, rec, sig);
  b.terms.push_back(b.loss);
  return b;
}

SampleLoss objective_loss(const ModelState& state, const TokenizerConfig& tok,
                          const TransformerConfig& trans, const ObjectiveSpec& spec,
                          const Signal& sample, std::uint64_t salt, bool with_grads) {
  Tape t;
  ParamContext ctx(t, state);
  SampleLoss out;
  VarId loss = -1;
  std::vector<VarId> terms;
  switch (spec.kind) {
    case ObjectiveKind::Nots:
    case ObjectiveKind::NotsNoConsistency:
    case ObjectiveKind::NonArConnected:
    case ObjectiveKind::AugmentOnly: {
      auto seq = build_sequence(spec.schedule, sample, salt);
      auto g = build_nots_graph(ctx, tok, trans, seq, spec.kind, spec.ar_target_next);
      loss = g.loss;
      terms = g.ar_terms;
      if (g.consistency >= 0) terms.push_back(g.consistency);
      break;
    }
    case ObjectiveKind::NextPeriod: {
      auto b = build_next_period_graph(ctx, tok, trans, sample, spec.period_length);
      loss = b.loss;
      terms = b.terms;
      break;
    }
    case ObjectiveKind::MaskedRecon: {
      auto b = build_masked_recon_graph(ctx, tok, trans, sample, spec.mask_ratio, salt);
      loss = b.loss;
      terms = b.terms;
      break;
    }
  }
  out.total = t.value(loss).item();
  for (VarId v : terms) out.terms.push_back(t.value(v).item());
  if (with_grads) out.grads = ctx.name_grads(t.backward(loss));
  return out;
}

void AdamOptimizer::step(ModelState& state, const std::map<std::string, Array>& grads,
                         double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (const auto& [name, g] : grads) {
    if (state.is_frozen(name)) continue;
    Array& p = state.at(name);
    Array& m = m_.try_emplace(name, Array::zeros_like(p)).first->second;
    Array& v = v_.try_emplace(name, Array::zeros_like(p)).first->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m.data[i] = cfg_.beta1 * m.data[i] + (1.0 - cfg_.beta1) * g.data[i];
      v.data[i] = cfg_.beta2 * v.data[i] + (1.0 - cfg_.beta2) * g.data[i] * g.data[i];
      double mhat = m.data[i] / bc1;
      double vhat = v.data[i] / bc2;
      p.data[i] -= lr * (mhat / (std::sqrt(vhat) + 1e-8) + cfg_.weight_decay * p.data[i]);
    }
  }
}

void FitHistory::write_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  std::size_t nterms = records.empty() ? 0 : records.front().mean_terms.size();
  f << "epoch,lr,loss";
  for (std::size_t i = 0; i < nterms; ++i) f << ",term" << i;
  f << "\n";
  f.precision(17);
  for (const auto& r : records) {
    f << r.epoch << "," << r.lr << "," << r.mean_loss;
    for (double v : r.mean_terms) f << "," << v;
    f << "\n";
  }
}

FitHistory fit(ModelState& state, const TrainConfig& cfg, std::size_t num_samples,
               const LossBuilder& builder) {
  cfg.validate();
  if (num_samples == 0) throw std::invalid_argument("fit: empty dataset");
  AdamOptimizer opt(cfg);
  Rng shuffle_rng(cfg.seed);
  FitHistory hist;
  std::vector<std::size_t> order(num_samples);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at_epoch(cfg, epoch);
    for (std::size_t i = num_samples - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.below(i + 1)]);

    double loss_sum = 0.0;
    std::vector<double> term_sum;
    std::size_t done = 0;
    while (done < num_samples) {
      std::size_t bend = std::min(done + static_cast<std::size_t>(cfg.batch_size),
                                  num_samples);
      std::map<std::string, Array> batch_grads;
      double batch_n = static_cast<double>(bend - done);
      for (std::size_t i = done; i < bend; ++i) {
        SampleLoss sl = builder(state, order[i]);
        if (!std::isfinite(sl.total))
          throw std::runtime_error("fit: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", batch starting " +
                                   std::to_string(done));
        loss_sum += sl.total;
        if (term_sum.size() < sl.terms.size()) term_sum.resize(sl.terms.size(), 0.0);
        for (std::size_t k = 0; k < sl.terms.size(); ++k) term_sum[k] += sl.terms[k];
        for (auto& [name, g] : sl.grads) {
          auto it = batch_grads.find(name);
          if (it == batch_grads.end()) {
            batch_grads.emplace(name, g);
          } else {
            for (std::size_t k = 0; k < g.size(); ++k) it->second.data[k] += g.data[k];
          }
        }
      }
      for (auto& [name, g] : batch_grads)
        for (double& v : g.data) v /= batch_n;
      opt.step(state, batch_grads, lr);
      done = bend;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.mean_loss = loss_sum / static_cast<double>(num_samples);
    for (double v : term_sum) rec.mean_terms.push_back(v / static_cast<double>(num_samples));
    hist.records.push_back(std::move(rec));
  }
  return hist;
}

}  // namespace nots
