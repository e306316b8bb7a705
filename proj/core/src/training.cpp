#include "tgcmc/training.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

#include "tgcmc/error.hpp"
#include "tgcmc/evaluation.hpp"

namespace tgcmc {

void TrainConfig::validate() const {
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw ConfigError("ema_decay must lie in (0, 1)");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
}

Experiment prepare_experiment(const RatingsDataset& ds, const TemporalSplit& split,
                              SequenceMode mode, ModelConfig model) {
  model.n_users = ds.n_users;
  model.n_items = ds.n_items;
  model.rating_levels = ds.rating_levels;
  if (mode == SequenceMode::kStatic) {
    if (model.recurrent != RecurrentKind::kNone) {
      throw ConfigError("static mode takes no recurrent cell");
    }
    model.steps = 1;
  } else if (model.recurrent == RecurrentKind::kNone) {
    throw ConfigError(std::string(to_string(mode)) + " mode needs a recurrent cell (gru or lstm)");
  }
  model.validate();

  Experiment ex;
  ex.model = model;
  ex.mode = mode;
  ex.train = edges_in(ds, split.train);
  ex.val = edges_in(ds, split.val);
  ex.test = edges_in(ds, split.test);
  ex.graph = prepare_encoder_graph(make_sequence(ex.train, mode, model.steps), model);
  return ex;
}

double evaluate_rmse(const ModelParameters& params, const ModelConfig& config,
                     const EncoderGraph& graph, std::span<const Edge> edges) {
  const auto predicted = predict_edges(params, config, graph, edges);
  std::vector<double> actual;
  actual.reserve(edges.size());
  for (const auto& e : edges) actual.push_back(config.rating_levels[e.level]);
  return rmse(predicted, actual);
}

TrainOutput train(const Experiment& ex, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed_ms = [&start] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };

  const SeedSequence master(config.seed);
  ModelParameters params = init_parameters(ex.model, master.derive(0));
  ModelParameters shadow = params;
  AdamState adam = make_adam_state(params);
  const AdamConfig adam_config = config.adam();

  std::vector<std::uint32_t> targets;
  targets.reserve(ex.train.size());
  for (const auto& e : ex.train) targets.push_back(e.level);

  RunResult result;
  result.seed = config.seed;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double loss_value = 0.0;
    try {
      diff::Tape tape;
      BoundModel model(tape, params, ex.model);
      SeedSequence dropout_seeds(master.derive(epoch));
      const auto enc = encode_sequence(model, ex.graph, /*training=*/true, dropout_seeds);
      const Var logits = edge_logits(model, enc.z, ex.graph, ex.train);
      const Var loss = diff::softmax_cross_entropy(logits, targets);
      loss_value = loss.value().item();
      const auto grads = tape.backward(loss);
      adam_step(params, grads, adam, adam_config);
    } catch (const NumericError& e) {
      throw TrainingError(epoch, std::string("training diverged: ") + e.what());
    }
    ema_update(shadow, params, config.ema_decay);
    result.train_loss.push_back(loss_value);

    EpochLog log{epoch, loss_value, std::nullopt, 0.0};
    if (config.eval_every > 0 && (epoch % config.eval_every == 0 || epoch == config.epochs) &&
        !ex.val.empty()) {
      log.val_rmse = evaluate_rmse(shadow, ex.model, ex.graph, ex.val);
      result.val_rmse.emplace_back(epoch, *log.val_rmse);
    }
    log.wall_ms = elapsed_ms();
    if (on_epoch) on_epoch(log);
  }

  result.train_rmse = ex.train.empty() ? 0.0 : evaluate_rmse(shadow, ex.model, ex.graph, ex.train);
  result.val_rmse_final = ex.val.empty() ? 0.0 : evaluate_rmse(shadow, ex.model, ex.graph, ex.val);
  result.test_rmse = ex.test.empty() ? 0.0 : evaluate_rmse(shadow, ex.model, ex.graph, ex.test);
  result.wall_seconds = elapsed_ms() / 1000.0;

  TrainOutput out;
  out.result = result;
  out.checkpoint.config = ex.model;
  out.checkpoint.params = std::move(params);
  out.checkpoint.ema = std::move(shadow);
  out.checkpoint.meta = {{"seed", config.seed},
                         {"epochs", config.epochs},
                         {"mode", std::string(to_string(ex.mode))},
                         {"learning_rate", config.learning_rate},
                         {"ema_decay", config.ema_decay}};
  return out;
}

Aggregate aggregate(std::span<const double> values) {
  Aggregate agg;
  agg.count = values.size();
  if (values.empty()) return agg;
  double total = 0.0;
  for (const double v : values) total += v;
  agg.mean = total / static_cast<double>(values.size());
  if (values.size() >= 2) {
    double ss = 0.0;
    for (const double v : values) ss += (v - agg.mean) * (v - agg.mean);
    agg.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return agg;
}

MultiRunResult multi_run(const Experiment& ex, const TrainConfig& base,
                         const std::vector<std::uint64_t>& seeds, std::size_t jobs) {
  if (seeds.size() < 2) throw DomainError("multi_run needs at least two seeds");
  MultiRunResult out;
  out.seeds = seeds;
  out.runs.resize(seeds.size());
  out.errors.resize(seeds.size());

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      TrainConfig cfg = base;
      cfg.seed = seeds[i];
      try {
        out.runs[i] = train(ex, cfg).result;
      } catch (const std::exception& e) {
        out.errors[i] = e.what();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, seeds.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  std::vector<double> rmses;
  for (const auto& run : out.runs) {
    if (run) rmses.push_back(run->test_rmse);
  }
  out.complete = rmses.size() == seeds.size();
  out.test_rmse = aggregate(rmses);
  return out;
}

}  // namespace tgcmc
