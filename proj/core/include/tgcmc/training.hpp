#ifndef TGCMC_TRAINING_HPP_
#define TGCMC_TRAINING_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tgcmc/checkpoint.hpp"
#include "tgcmc/dataset.hpp"
#include "tgcmc/error.hpp"
#include "tgcmc/model.hpp"
#include "tgcmc/optim.hpp"
#include "tgcmc/temporal_graph.hpp"

namespace tgcmc {

struct TrainConfig {
  std::size_t epochs = 1000;
  double learning_rate = 1e-2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double ema_decay = 0.995;
  std::uint64_t seed = 1;
  // Validation RMSE is logged every `eval_every` epochs (0 disables).
  std::size_t eval_every = 50;

  void validate() const;
  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_eps}; }
};

// Immutable inputs shared by every run of one configuration.
struct Experiment {
  ModelConfig model;
  SequenceMode mode = SequenceMode::kStatic;
  std::vector<Edge> train;
  std::vector<Edge> val;
  std::vector<Edge> test;
  // Built from the training edges only; fixed for the whole run.
  EncoderGraph graph;
};

// Fills the node universe and rating levels of `model` from `ds`, builds the
// T-step sequence of the training edges, and validates the combination
// (static mode needs no cell; temporal modes need one).
Experiment prepare_experiment(const RatingsDataset& ds, const TemporalSplit& split,
                              SequenceMode mode, ModelConfig model);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;  // mean negative log-likelihood per training edge
  std::optional<double> val_rmse;
  double wall_ms = 0.0;
};

struct RunResult {
  std::uint64_t seed = 0;
  std::vector<double> train_loss;  // per epoch
  std::vector<std::pair<std::size_t, double>> val_rmse;  // (epoch, rmse) at the eval cadence
  // Final metrics, EMA parameters, eval mode.
  double train_rmse = 0.0;
  double val_rmse_final = 0.0;
  double test_rmse = 0.0;
  double wall_seconds = 0.0;
};

struct TrainOutput {
  RunResult result;
  Checkpoint checkpoint;
};

// Raised when a run diverges; carries the 1-based epoch.
class TrainingError : public Error {
 public:
  TrainingError(std::size_t epoch, const std::string& what)
      : Error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Full-batch training: forward over all training edges, backward, Adam,
// EMA. The EMA shadow starts at the initial parameters and is what every
// reported RMSE uses.
TrainOutput train(const Experiment& experiment, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// RMSE of the eval-mode model on `edges`.
double evaluate_rmse(const ModelParameters& params, const ModelConfig& config,
                     const EncoderGraph& graph, std::span<const Edge> edges);

struct Aggregate {
  double mean = 0.0;
  std::optional<double> std;  // sample (n - 1) deviation; absent for one value
  std::size_t count = 0;
};

Aggregate aggregate(std::span<const double> values);

struct MultiRunResult {
  std::vector<std::uint64_t> seeds;
  std::vector<std::optional<RunResult>> runs;  // parallel to seeds
  std::vector<std::string> errors;             // parallel to seeds, empty on success
  bool complete = false;
  Aggregate test_rmse;  // over completed runs
};

// Trains one run per seed, up to `jobs` concurrently. A failing run is
// recorded and leaves `complete` false; other runs still finish.
MultiRunResult multi_run(const Experiment& experiment, const TrainConfig& base,
                         const std::vector<std::uint64_t>& seeds, std::size_t jobs = 1);

}  // namespace tgcmc

#endif  // TGCMC_TRAINING_HPP_
