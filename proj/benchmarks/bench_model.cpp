#include <benchmark/benchmark.h>

#include "tgcmc/synthetic.hpp"
#include "tgcmc/training.hpp"

namespace {

using namespace tgcmc;

// One full-batch training epoch on a synthetic graph roughly the size of the
// ML-100k training split.
void BM_TrainEpoch(benchmark::State& state) {
  const auto mode = static_cast<SequenceMode>(state.range(0));
  const auto cell = static_cast<RecurrentKind>(state.range(1));
  const RatingsDataset ds = build_dataset(planted_factor_ratings(943, 1682, 100000, 4, 11));
  const TemporalSplit split = temporal_split(ds);
  ModelConfig model;
  model.recurrent = cell;
  model.steps = mode == SequenceMode::kStatic ? 1 : 10;
  const Experiment ex = prepare_experiment(ds, split, mode, model);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.eval_every = 0;
  for (auto _ : state) {
    auto out = train(ex, cfg);
    benchmark::DoNotOptimize(out.result.test_rmse);
  }
}
BENCHMARK(BM_TrainEpoch)
    ->ArgNames({"mode", "cell"})
    ->Args({static_cast<int>(SequenceMode::kStatic), static_cast<int>(RecurrentKind::kNone)})
    ->Args({static_cast<int>(SequenceMode::kIncremental), static_cast<int>(RecurrentKind::kGru)})
    ->Unit(benchmark::kMillisecond)
    ->Iterations(2);

}  // namespace
