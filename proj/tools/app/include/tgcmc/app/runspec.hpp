#ifndef TGCMC_APP_RUNSPEC_HPP_
#define TGCMC_APP_RUNSPEC_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "tgcmc/dataset.hpp"
#include "tgcmc/model.hpp"
#include "tgcmc/temporal_graph.hpp"
#include "tgcmc/training.hpp"

namespace tgcmc::app {

// Everything one training command needs. Loaded from a flat JSON object whose
// keys are listed by runspec_keys(); unknown keys are rejected.
struct RunSpec {
  RunSpec() { model.steps = 10; }

  std::string dataset;
  DatasetFormat format = DatasetFormat::kMl100k;
  std::string dataset_label = "ML-100k";
  double test_fraction = 0.2;
  double val_fraction = 0.2;
  SequenceMode mode = SequenceMode::kStatic;
  // n_users, n_items and rating_levels are filled from the data. `steps`
  // defaults to 10 and is forced to 1 in static mode.
  ModelConfig model;
  TrainConfig train;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string out = "runs";
  std::size_t jobs = 1;

  // mode=static needs cell=none and the temporal modes need a cell.
  void validate() const;
};

const std::vector<std::string>& runspec_keys();

// Applies the keys of `j` on top of `base`. Throws ConfigError naming the
// first unknown key or the key with a bad value.
RunSpec apply_runspec_json(RunSpec base, const nlohmann::json& j);
RunSpec load_runspec(const std::filesystem::path& path, RunSpec base = {});

nlohmann::ordered_json runspec_to_json(const RunSpec& spec);

// Hash of everything that determines a single run's outcome for `seed`
// (excludes out, jobs and the seed list).
std::string run_fingerprint(const RunSpec& spec, const std::string& dataset_checksum,
                            std::uint64_t seed);

}  // namespace tgcmc::app

#endif  // TGCMC_APP_RUNSPEC_HPP_
