#include <gtest/gtest.h>

#include <cmath>

#include "tgcmc/checkpoint.hpp"
#include "tgcmc/synthetic.hpp"
#include "tgcmc/training.hpp"

namespace tgcmc {
namespace {

struct Tiny {
  RatingsDataset ds = build_dataset(planted_factor_ratings(20, 20, 200, 2, 1));
  TemporalSplit split = temporal_split(ds);
};

const Tiny& tiny() {
  static const Tiny t;
  return t;
}

ModelConfig small_model(RecurrentKind cell = RecurrentKind::kNone) {
  ModelConfig m;
  m.d_hidden = 20;
  m.d_output = 8;
  m.recurrent_hidden = 6;
  m.recurrent = cell;
  m.steps = 3;
  return m;
}

// The overfit oracle: full-size default model, no dropout, default seed.
// With dropout 0.7 the EMA copy is still far from a fit after 200 epochs.
Experiment overfit_experiment() {
  ModelConfig m;
  m.dropout = 0.0;
  return prepare_experiment(tiny().ds, tiny().split, SequenceMode::kStatic, m);
}

TEST(Train, OverfitsTinyPlantedDataset) {
  TrainConfig cfg;
  cfg.epochs = 200;
  const auto r = train(overfit_experiment(), cfg).result;
  EXPECT_LT(r.train_rmse, 0.5);
}

TEST(Train, SmoothedLossIsNonincreasingOnTinyDataset) {
  TrainConfig cfg;
  cfg.epochs = 200;
  const auto loss = train(overfit_experiment(), cfg).result.train_loss;
  ASSERT_EQ(loss.size(), 200u);
  double previous = INFINITY;
  for (std::size_t i = 9; i < loss.size(); ++i) {
    double avg = 0.0;
    for (std::size_t k = i - 9; k <= i; ++k) avg += loss[k];
    avg /= 10.0;
    EXPECT_LE(avg, previous) << "epoch " << i + 1;
    previous = avg;
  }
}

TEST(Train, ZeroEpochsEvaluatesInitialModel) {
  const auto ex = prepare_experiment(tiny().ds, tiny().split, SequenceMode::kStatic, small_model());
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto out = train(ex, cfg);
  EXPECT_TRUE(out.result.train_loss.empty());
  EXPECT_TRUE(out.result.val_rmse.empty());
  EXPECT_EQ(out.checkpoint.ema, out.checkpoint.params);
  EXPECT_EQ(out.checkpoint.params, init_parameters(ex.model, SeedSequence(cfg.seed).derive(0)));
  EXPECT_EQ(out.result.test_rmse, evaluate_rmse(out.checkpoint.ema, ex.model, ex.graph, ex.test));
  EXPECT_GT(out.result.test_rmse, 0.0);
}

void expect_identical(const TrainOutput& a, const TrainOutput& b) {
  EXPECT_EQ(a.result.train_loss, b.result.train_loss);
  EXPECT_EQ(a.result.val_rmse, b.result.val_rmse);
  EXPECT_EQ(a.result.train_rmse, b.result.train_rmse);
  EXPECT_EQ(a.result.val_rmse_final, b.result.val_rmse_final);
  EXPECT_EQ(a.result.test_rmse, b.result.test_rmse);
  EXPECT_EQ(serialize_checkpoint(a.checkpoint), serialize_checkpoint(b.checkpoint));
}

TEST(Train, SameSeedIsBitwiseIdentical) {
  for (const auto& [mode, cell] : {std::pair{SequenceMode::kStatic, RecurrentKind::kNone},
                                   std::pair{SequenceMode::kIncremental, RecurrentKind::kGru},
                                   std::pair{SequenceMode::kDisjoint, RecurrentKind::kLstm}}) {
    const auto ex = prepare_experiment(tiny().ds, tiny().split, mode, small_model(cell));
    TrainConfig cfg;
    cfg.epochs = 15;
    cfg.eval_every = 4;
    expect_identical(train(ex, cfg), train(ex, cfg));
  }
}

TEST(Train, DifferentSeedsDiffer) {
  const auto ex = prepare_experiment(tiny().ds, tiny().split, SequenceMode::kStatic, small_model());
  TrainConfig a, b;
  a.epochs = b.epochs = 3;
  b.seed = 2;
  EXPECT_NE(train(ex, a).result.train_loss, train(ex, b).result.train_loss);
}

TEST(Train, ValidationFollowsCadenceAndFinalEpoch) {
  const auto ex = prepare_experiment(tiny().ds, tiny().split, SequenceMode::kStatic, small_model());
  TrainConfig cfg;
  cfg.epochs = 12;
  cfg.eval_every = 5;
  std::vector<EpochLog> logs;
  const auto r = train(ex, cfg, [&](const EpochLog& log) { logs.push_back(log); }).result;
  ASSERT_EQ(logs.size(), 12u);
  std::vector<std::size_t> evaluated;
  for (const auto& [epoch, rmse] : r.val_rmse) evaluated.push_back(epoch);
  EXPECT_EQ(evaluated, (std::vector<std::size_t>{5, 10, 12}));
  for (std::size_t i = 0; i < logs.size(); ++i) {
    EXPECT_EQ(logs[i].epoch, i + 1);
    EXPECT_EQ(logs[i].train_loss, r.train_loss[i]);
    EXPECT_EQ(logs[i].val_rmse.has_value(), i == 4 || i == 9 || i == 11);
    if (i > 0) EXPECT_GE(logs[i].wall_ms, logs[i - 1].wall_ms);
  }
  EXPECT_EQ(r.val_rmse.back().second, r.val_rmse_final);
}

TEST(Train, EmaStaysFiniteAndEvalIsDeterministic) {
  const auto ex = prepare_experiment(tiny().ds, tiny().split, SequenceMode::kIncremental,
                                     small_model(RecurrentKind::kGru));
  TrainConfig cfg;
  cfg.epochs = 20;
  const auto out = train(ex, cfg);
  for (const auto& [name, t] : out.checkpoint.ema) EXPECT_TRUE(t.all_finite()) << name;
  EXPECT_EQ(evaluate_rmse(out.checkpoint.ema, ex.model, ex.graph, ex.test),
            evaluate_rmse(out.checkpoint.ema, ex.model, ex.graph, ex.test));
  EXPECT_EQ(out.result.test_rmse, evaluate_rmse(out.checkpoint.ema, ex.model, ex.graph, ex.test));
}

TEST(Train, DivergenceReportsEpoch) {
  const auto ex = prepare_experiment(tiny().ds, tiny().split, SequenceMode::kStatic, small_model());
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.learning_rate = 1e200;
  try {
    train(ex, cfg);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_GE(e.epoch(), 1u);
    EXPECT_LE(e.epoch(), 50u);
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST(Train, InvalidConfigRejected) {
  TrainConfig cfg;
  cfg.ema_decay = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(PrepareExperiment, ModeAndCellMustAgree) {
  EXPECT_THROW(prepare_experiment(tiny().ds, tiny().split, SequenceMode::kStatic, small_model(RecurrentKind::kGru)),
               ConfigError);
  EXPECT_THROW(prepare_experiment(tiny().ds, tiny().split, SequenceMode::kDisjoint, small_model()), ConfigError);
  const auto ex = prepare_experiment(tiny().ds, tiny().split, SequenceMode::kIncremental,
                                     small_model(RecurrentKind::kLstm));
  EXPECT_EQ(ex.graph.steps.size(), 3u);
  EXPECT_EQ(ex.train.size(), tiny().split.train.size());
  EXPECT_EQ(ex.val.size(), tiny().split.val.size());
  EXPECT_EQ(ex.test.size(), tiny().split.test.size());
  EXPECT_EQ(ex.model.n_users, tiny().ds.n_users);
}

TEST(Gradient, FullBatchEqualsSumOverEdgeSubsets) {
  for (const auto cell : {RecurrentKind::kNone, RecurrentKind::kGru}) {
    const auto mode = cell == RecurrentKind::kNone ? SequenceMode::kStatic : SequenceMode::kIncremental;
    const auto ex = prepare_experiment(tiny().ds, tiny().split, mode, small_model(cell));
    const auto params = init_parameters(ex.model, 5);
    // Mean loss gradient over `edges`, with a fixed dropout draw.
    const auto mean_grad = [&](std::span<const Edge> edges) {
      diff::Tape tape;
      BoundModel model(tape, params, ex.model);
      SeedSequence seeds(77);
      const auto enc = encode_sequence(model, ex.graph, true, seeds);
      std::vector<std::uint32_t> targets;
      for (const auto& e : edges) targets.push_back(e.level);
      return tape.backward(diff::softmax_cross_entropy(edge_logits(model, enc.z, ex.graph, edges), targets));
    };
    const std::span<const Edge> all(ex.train);
    const std::size_t cut = all.size() / 3;
    const auto g_all = mean_grad(all);
    const auto g_a = mean_grad(all.first(cut));
    const auto g_b = mean_grad(all.subspan(cut));
    const double n = static_cast<double>(all.size()), na = static_cast<double>(cut), nb = n - na;
    for (const auto& [name, g] : g_all) {
      double scale = 1e-12;
      for (std::size_t i = 0; i < g.size(); ++i) scale = std::max(scale, std::abs(n * g[i]));
      for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_NEAR(n * g[i], na * g_a.at(name)[i] + nb * g_b.at(name)[i], 1e-10 * scale) << name;
      }
    }
  }
}

TEST(Aggregate, TwoPointFormula) {
  const std::vector<double> v{1.0, 1.1};
  const auto agg = aggregate(v);
  EXPECT_NEAR(agg.mean, 1.05, 1e-15);
  ASSERT_TRUE(agg.std.has_value());
  EXPECT_NEAR(*agg.std, std::sqrt(0.005), 1e-15);
  EXPECT_EQ(agg.count, 2u);
}

TEST(Aggregate, SingleValueHasNoStd) {
  const std::vector<double> v{1.2};
  const auto agg = aggregate(v);
  EXPECT_EQ(agg.mean, 1.2);
  EXPECT_FALSE(agg.std.has_value());
}

TEST(MultiRun, IdenticalSeedsGiveZeroStd) {
  const auto ex = prepare_experiment(tiny().ds, tiny().split, SequenceMode::kStatic, small_model());
  TrainConfig cfg;
  cfg.epochs = 5;
  const auto r = multi_run(ex, cfg, {3, 3, 3, 3, 3});
  EXPECT_TRUE(r.complete);
  ASSERT_TRUE(r.test_rmse.std.has_value());
  EXPECT_EQ(*r.test_rmse.std, 0.0);
  EXPECT_EQ(r.test_rmse.count, 5u);
}

TEST(MultiRun, ParallelMatchesSerial) {
  const auto ex = prepare_experiment(tiny().ds, tiny().split, SequenceMode::kStatic, small_model());
  TrainConfig cfg;
  cfg.epochs = 5;
  const auto serial = multi_run(ex, cfg, {1, 2, 3, 4}, 1);
  const auto parallel = multi_run(ex, cfg, {1, 2, 3, 4}, 3);
  ASSERT_TRUE(serial.complete && parallel.complete);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(serial.runs[i]->seed, i + 1);
    EXPECT_EQ(serial.runs[i]->test_rmse, parallel.runs[i]->test_rmse);
    EXPECT_EQ(serial.runs[i]->train_loss, parallel.runs[i]->train_loss);
  }
  EXPECT_EQ(serial.test_rmse.mean, parallel.test_rmse.mean);
  EXPECT_GT(*serial.test_rmse.std, 0.0);
}

TEST(MultiRun, FailedRunsAreRecordedAndMarkIncomplete) {
  const auto ex = prepare_experiment(tiny().ds, tiny().split, SequenceMode::kStatic, small_model());
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.learning_rate = 1e200;
  const auto r = multi_run(ex, cfg, {1, 2});
  EXPECT_FALSE(r.complete);
  EXPECT_FALSE(r.runs[0].has_value());
  EXPECT_FALSE(r.errors[0].empty());
  EXPECT_EQ(r.test_rmse.count, 0u);
}

TEST(MultiRun, NeedsTwoSeeds) {
  const auto ex = prepare_experiment(tiny().ds, tiny().split, SequenceMode::kStatic, small_model());
  EXPECT_THROW(multi_run(ex, TrainConfig{}, {1}), DomainError);
}

}  // namespace
}  // namespace tgcmc
