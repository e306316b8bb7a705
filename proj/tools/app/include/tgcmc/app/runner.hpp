#ifndef TGCMC_APP_RUNNER_HPP_
#define TGCMC_APP_RUNNER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tgcmc/app/runspec.hpp"
#include "tgcmc/evaluation.hpp"
#include "tgcmc/training.hpp"

namespace tgcmc::app {

struct LoadedData {
  RatingsDataset dataset;
  TemporalSplit split;
  std::string checksum;
};

LoadedData load_data(const RunSpec& spec);

// RMSE of predicting `constant` for every rating in `range`.
double constant_rmse(const RatingsDataset& ds, IndexRange range, double constant = 3.0);

// One model family in the results table.
struct Variant {
  std::string key;     // directory name, e.g. "gru-incremental"
  std::string method;  // table label, e.g. "GCMC-GRU‡"
  SequenceMode mode = SequenceMode::kStatic;
  RecurrentKind cell = RecurrentKind::kNone;
  // Sizes the recurrent state to d_output, so each decoder Q_r is
  // d_output x d_output. A 500-wide state with a 500 x 500 decoder diverges
  // at the table learning rate.
  bool state_width_is_d_output = false;
};

// Static GCMC and the four recurrent variants (LSTM/GRU x disjoint/incremental).
const std::vector<Variant>& table_variants();
const Variant& find_variant(const std::string& key);
Variant variant_of(const RunSpec& spec);

struct SeedRun {
  std::uint64_t seed = 0;
  RunResult result;
  bool cached = false;
};

// Per-seed files under `dir`: train_log.jsonl (one line per epoch),
// checkpoint.bin, and result.json, written last. A result.json whose
// fingerprint matches is reused instead of training again.
SeedRun run_seed(const Experiment& experiment, const RunSpec& spec, const std::string& checksum,
                 std::uint64_t seed, const std::filesystem::path& dir);

struct VariantOutcome {
  Variant variant;
  std::vector<std::uint64_t> seeds;
  std::vector<std::optional<SeedRun>> runs;  // parallel to seeds
  std::vector<std::string> errors;           // parallel to seeds
  Aggregate test_rmse;
  bool complete = false;

  ReportRow report_row(const std::string& dataset_label) const;
};

struct StudyResult {
  std::vector<VariantOutcome> variants;
  double no_skill_rmse = 0.0;
  EvalReport report;
  bool complete = false;
};

using Progress = std::function<void(const std::string&)>;

// Trains every (variant, seed) pair of `variants` with the hyperparameters
// of `base`, up to base.jobs at once, caching under base.out/<variant.key>/
// seed-<n>. Writes report.txt, report.tsv and summary.json to base.out.
// With `include_no_skill` the constant-3.0 row is added to the report.
StudyResult run_study(const RunSpec& base, std::span<const Variant> variants, bool include_no_skill,
                      const Progress& progress = {});

}  // namespace tgcmc::app

#endif  // TGCMC_APP_RUNNER_HPP_
