#include <benchmark/benchmark.h>

#include "nots/armodel.hpp"
#include "nots/degrade.hpp"
#include "nots/harness.hpp"
#include "nots/objective.hpp"
#include "nots/rng.hpp"
#include "nots/synthgen.hpp"

namespace {

nots::Signal random_signal(int channels, int length, std::uint64_t seed) {
  nots::Signal s({channels, length});
  nots::Rng rng(seed);
  for (double& v : s.data) v = rng.normal();
  return s;
}

void BM_FbmGenerate(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  nots::FbmGenerator gen(n, 0.7);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    auto sample = gen.generate(seed++);
    benchmark::DoNotOptimize(sample.signal.data.data());
  }
}
BENCHMARK(BM_FbmGenerate)->Arg(256)->Arg(1024);

void BM_GlobalSmooth(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  nots::Signal s = random_signal(1, n, 3);
  auto op = nots::DegradationOp::global(1.0 / 16.0);
  for (auto _ : state) {
    auto out = nots::apply(op, s);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(BM_GlobalSmooth)->Arg(256)->Arg(1024)->Arg(4096);

void BM_NotsLoss(benchmark::State& state) {
  nots::ExperimentConfig cfg;
  cfg.tokenizer.stage_widths = {4, 8};
  cfg.tokenizer.token_dim = 8;
  cfg.transformer.layers = 2;
  cfg.transformer.heads = 2;
  cfg.transformer.token_dim = 8;
  cfg.schedule.ops = {nots::DegradationOp::local(8), nots::DegradationOp::local(4)};
  cfg.objective.schedule = cfg.schedule;
  nots::ModelState model = nots::init_base_model(cfg, 1);
  nots::Signal s = random_signal(1, 128, 5);
  for (auto _ : state) {
    auto loss = nots::objective_loss(model, cfg.tokenizer, cfg.transformer, cfg.objective,
                                     s, 0, true);
    benchmark::DoNotOptimize(loss.total);
  }
}
BENCHMARK(BM_NotsLoss);

}  // namespace

BENCHMARK_MAIN();
