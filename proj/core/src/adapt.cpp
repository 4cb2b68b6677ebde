#include "nots/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nots/rng.hpp"

namespace nots {

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "regression") return TaskKind::Regression;
  if (s == "classification") return TaskKind::Classification;
  if (s == "imputation") return TaskKind::Imputation;
  if (s == "anomaly") return TaskKind::Anomaly;
  throw std::invalid_argument("unknown task kind '" + s + "'");
}

ParamPartition AdaptedModel::partition() const {
  ParamPartition p;
  p.frozen = state.frozen_params();
  p.trainable = state.trainable_params();
  return p;
}

AdaptedModel attach_adaptors(const ModelState& base, const TokenizerConfig& tok,
                             const TransformerConfig& trans,
                             const DegradationSchedule& schedule,
                             const ChannelAdaptorSpec& channel, const TaskSpec& task,
                             bool freeze_base, std::uint64_t seed) {
  if (channel.out_channels < 1 || channel.in_channels < 1)
    throw std::invalid_argument("channel adaptor: channel counts must be >= 1");
  if (channel.out_channels > trans.max_channels)
    throw std::invalid_argument("channel adaptor: C' = " +
                                std::to_string(channel.out_channels) +
                                " exceeds C_max = " + std::to_string(trans.max_channels));
  if (task.prompts < 1 || task.prompts > trans.max_prompts)
    throw std::invalid_argument("task adaptor: prompt count " +
                                std::to_string(task.prompts) + " outside [1, " +
                                std::to_string(trans.max_prompts) + "]");
  if (task.output_dim < 1)
    throw std::invalid_argument("task adaptor: output dim must be >= 1");

  AdaptedModel m;
  m.tok = tok;
  m.trans = trans;
  m.schedule = schedule;
  m.channel = channel;
  m.task = task;
  m.state = base;
  if (freeze_base) m.state.freeze_all();

  Rng rng(seed);
  const int d = trans.token_dim;
  // Identity-padded (or truncated) mixing so adaptation starts from the
  // base model's behavior.
  Array mix({channel.in_channels, channel.out_channels});
  for (int i = 0; i < std::min(channel.in_channels, channel.out_channels); ++i)
    mix.at(i, i) = 1.0;
  m.state.add("adapt.mix", std::move(mix));
  m.state.add("adapt.chan_emb", uniform_init({channel.out_channels, d}, d, rng));
  for (int l = 0; l < trans.layers; ++l)
    m.state.add("adapt.prompt.l" + std::to_string(l),
                uniform_init({task.prompts, d}, d, rng));
  m.state.add("adapt.head.w", Array({d, task.output_dim}));
  m.state.add("adapt.head.b", Array({task.output_dim}));
  return m;
}

AdaptedForward adapted_forward(ParamContext& ctx, const AdaptedModel& m,
                               const Signal& sample) {
  Tape& t = ctx.tape();
  if (sample.rows() != m.channel.in_channels)
    throw ShapeError("adapted_forward: sample has " + std::to_string(sample.rows()) +
                     " channels, adaptor expects " +
                     std::to_string(m.channel.in_channels));
  const int T = sample.cols();
  const int G = m.tok.token_count(T);
  const int K = m.schedule.levels();
  const int Cp = m.channel.out_channels;
  const int P = m.task.prompts;
  const int d = m.trans.token_dim;

  auto seq = build_sequence(m.schedule, sample);
  VarId mix_t = ops::transpose(t, ctx["adapt.mix"]);  // (C', C)

  std::vector<VarId> flat_parts;
  GroupLayout layout = GroupLayout::build(K - 1, Cp, G, P);
  // Prompt rows are placeholders; deep prompting overwrites them ahead of
  // every layer.
  flat_parts.push_back(t.constant(Array({P, d})));
  for (int k = 1; k < K; ++k) {
    VarId mixed = ops::matmul(t, mix_t, t.constant(seq[k - 1]));  // (C', T)
    auto groups = encode(ctx, m.tok, "tok", mixed);
    for (VarId g : groups) flat_parts.push_back(g);
  }
  VarId flat = ops::concat_rows(t, flat_parts);

  // Degradation embeddings from the base; channel embeddings are the
  // adaptor's fresh set.
  const int S = layout.size();
  Array deg_onehot({S, m.trans.max_levels});
  Array chan_onehot({S, Cp});
  for (int i = 0; i < S; ++i) {
    const auto& e = layout.pos[i];
    if (e.is_prompt) continue;
    deg_onehot.at(i, e.level - 1) = 1.0;
    chan_onehot.at(i, e.channel) = 1.0;
  }
  VarId x = ops::add(t, flat, ops::matmul(t, t.constant(deg_onehot), ctx["ar.deg_emb"]));
  x = ops::add(t, x, ops::matmul(t, t.constant(chan_onehot), ctx["adapt.chan_emb"]));

  std::vector<VarId> prompts;
  for (int l = 0; l < m.trans.layers; ++l)
    prompts.push_back(ctx["adapt.prompt.l" + std::to_string(l)]);
  VarId out = transformer_forward(ctx, m.trans, "ar", x, layout, prompts);

  AdaptedForward fwd;
  // Mean over final-layer prompt outputs through the linear head.
  Array pool({1, P});
  for (int p = 0; p < P; ++p) pool.at(0, p) = 1.0 / P;
  VarId pooled = ops::matmul(t, t.constant(pool), ops::slice_rows(t, out, 0, P));
  VarId head = ops::matmul(t, pooled, ctx["adapt.head.w"]);
  fwd.task_output = ops::shift_cols(t, head, ctx["adapt.head.b"]);

  std::vector<VarId> last_group;
  for (int c = 0; c < Cp; ++c) {
    auto [start, len] = layout.extent(K - 1, c);
    last_group.push_back(ops::slice_rows(t, out, start, len));
  }
  fwd.reconstruction = decode(ctx, m.tok, "tok", last_group, T);
  return fwd;
}

std::vector<double> predict_regression(const AdaptedModel& m, const Signal& sample) {
  Tape t;
  ParamContext ctx(t, m.state);
  auto fwd = adapted_forward(ctx, m, sample);
  return t.value(fwd.task_output).data;
}

int predict_class(const AdaptedModel& m, const Signal& sample) {
  auto logits = predict_regression(m, sample);
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) -
                          logits.begin());
}

Signal reconstruct(const AdaptedModel& m, const Signal& sample) {
  Tape t;
  ParamContext ctx(t, m.state);
  auto fwd = adapted_forward(ctx, m, sample);
  return t.value(fwd.reconstruction);
}

std::vector<double> anomaly_scores(const AdaptedModel& m, const Signal& sample) {
  Signal rec = reconstruct(m, sample);
  const int C = std::min(rec.rows(), sample.rows());
  std::vector<double> scores(sample.cols(), 0.0);
  for (int ts = 0; ts < sample.cols(); ++ts) {
    double acc = 0.0;
    for (int c = 0; c < C; ++c) acc += std::abs(rec.at(c, ts) - sample.at(c, ts));
    scores[ts] = acc / C;
  }
  return scores;
}

FitHistory tune(AdaptedModel& m, const std::vector<Signal>& inputs,
                const std::vector<std::vector<double>>& targets, const TrainConfig& cfg) {
  if (inputs.size() != targets.size() || inputs.empty())
    throw std::invalid_argument("tune: inputs/targets must be non-empty and aligned");
  auto builder = [&](const ModelState& state, std::size_t i) -> SampleLoss {
    (void)state;  // aliases m.state, which fit updates in place
    Tape t;
    ParamContext ctx(t, m.state);
    auto fwd = adapted_forward(ctx, m, inputs[i]);
    VarId loss = -1;
    switch (m.task.kind) {
      case TaskKind::Regression: {
        Array tgt({1, m.task.output_dim}, targets[i]);
        loss = ops::mae(t, fwd.task_output, t.constant(std::move(tgt)));
        break;
      }
      case TaskKind::Classification: {
        Array onehot({1, m.task.output_dim});
        int cls = static_cast<int>(targets[i].at(0));
        if (cls < 0 || cls >= m.task.output_dim)
          throw std::invalid_argument("tune: class label out of range");
        onehot.at(0, cls) = 1.0;
        loss = ops::cross_entropy(t, fwd.task_output, t.constant(std::move(onehot)));
        break;
      }
      case TaskKind::Imputation:
      case TaskKind::Anomaly: {
        Array tgt({m.channel.out_channels,
                   static_cast<int>(targets[i].size()) / m.channel.out_channels},
                  targets[i]);
        loss = ops::mae(t, fwd.reconstruction, t.constant(std::move(tgt)));
        break;
      }
    }
    SampleLoss sl;
    sl.total = t.value(loss).item();
    sl.terms = {sl.total};
    sl.grads = ctx.name_grads(t.backward(loss));
    return sl;
  };
  return fit(m.state, cfg, inputs.size(), builder);
}

}  // namespace nots
