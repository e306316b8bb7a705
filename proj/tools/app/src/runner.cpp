#include "tgcmc/app/runner.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

#include "tgcmc/checkpoint.hpp"
#include "tgcmc/error.hpp"

namespace tgcmc::app {
namespace fs = std::filesystem;
namespace {

void write_file(const fs::path& path, const std::string& contents) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << contents;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

nlohmann::ordered_json result_to_json(const RunResult& r, const std::string& fingerprint) {
  nlohmann::ordered_json val = nlohmann::ordered_json::array();
  for (const auto& [epoch, v] : r.val_rmse) val.push_back({epoch, v});
  return {{"fingerprint", fingerprint},   {"seed", r.seed},
          {"train_rmse", r.train_rmse},   {"val_rmse_final", r.val_rmse_final},
          {"test_rmse", r.test_rmse},     {"wall_seconds", r.wall_seconds},
          {"train_loss", r.train_loss},   {"val_rmse", val}};
}

RunResult result_from_json(const nlohmann::json& j) {
  RunResult r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.train_rmse = j.at("train_rmse").get<double>();
  r.val_rmse_final = j.at("val_rmse_final").get<double>();
  r.test_rmse = j.at("test_rmse").get<double>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  r.train_loss = j.at("train_loss").get<std::vector<double>>();
  for (const auto& p : j.at("val_rmse")) r.val_rmse.emplace_back(p.at(0).get<std::size_t>(), p.at(1).get<double>());
  return r;
}

std::optional<RunResult> cached_result(const fs::path& path, const std::string& fingerprint) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("fingerprint").get<std::string>() != fingerprint) return std::nullopt;
    return result_from_json(j);
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

std::string log_line(const EpochLog& log) {
  nlohmann::ordered_json j{{"epoch", log.epoch}, {"train_loss", log.train_loss}};
  j["val_rmse"] = log.val_rmse ? nlohmann::ordered_json(*log.val_rmse) : nlohmann::ordered_json();
  j["wall_ms"] = log.wall_ms;
  return j.dump();
}

std::string seed_dir_name(std::uint64_t seed) { return "seed-" + std::to_string(seed); }

}  // namespace

LoadedData load_data(const RunSpec& spec) {
  if (spec.dataset.empty()) throw ConfigError("no dataset path given");
  LoadedData d;
  d.dataset = load_dataset(spec.dataset, spec.format);
  d.split = temporal_split(d.dataset, spec.test_fraction, spec.val_fraction);
  d.checksum = dataset_checksum(d.dataset);
  return d;
}

double constant_rmse(const RatingsDataset& ds, IndexRange range, double constant) {
  std::vector<double> predicted(range.size(), constant);
  std::vector<double> actual;
  actual.reserve(range.size());
  for (std::size_t i = range.begin; i < range.end; ++i) actual.push_back(ds.rating_value(ds.ratings[i]));
  return rmse(predicted, actual);
}

const std::vector<Variant>& table_variants() {
  static const std::vector<Variant> variants{
      {"static", "GCMC (new split)", SequenceMode::kStatic, RecurrentKind::kNone},
      {"lstm-disjoint", "GCMC-LSTM†", SequenceMode::kDisjoint, RecurrentKind::kLstm, true},
      {"gru-disjoint", "GCMC-GRU†", SequenceMode::kDisjoint, RecurrentKind::kGru, true},
      {"lstm-incremental", "GCMC-LSTM‡", SequenceMode::kIncremental, RecurrentKind::kLstm, true},
      {"gru-incremental", "GCMC-GRU‡", SequenceMode::kIncremental, RecurrentKind::kGru, true},
  };
  return variants;
}

const Variant& find_variant(const std::string& key) {
  for (const auto& v : table_variants()) {
    if (v.key == key) return v;
  }
  throw ConfigError("unknown variant '" + key + "'");
}

Variant variant_of(const RunSpec& spec) {
  for (const auto& v : table_variants()) {
    if (v.mode == spec.mode && v.cell == spec.model.recurrent) return v;
  }
  throw ConfigError("no variant for mode=" + std::string(to_string(spec.mode)) +
                    " cell=" + std::string(to_string(spec.model.recurrent)));
}

SeedRun run_seed(const Experiment& experiment, const RunSpec& spec, const std::string& checksum,
                 std::uint64_t seed, const fs::path& dir) {
  const std::string fingerprint = run_fingerprint(spec, checksum, seed);
  const fs::path result_path = dir / "result.json";
  if (auto cached = cached_result(result_path, fingerprint)) {
    return SeedRun{seed, std::move(*cached), true};
  }
  fs::create_directories(dir);
  TrainConfig cfg = spec.train;
  cfg.seed = seed;

  const fs::path log_path = dir / "train_log.jsonl";
  const fs::path partial_log = log_path.string() + ".partial";
  std::ofstream log(partial_log, std::ios::trunc);
  if (!log) throw Error("cannot write " + partial_log.string());
  auto out = train(experiment, cfg, [&log](const EpochLog& e) { log << log_line(e) << std::endl; });
  log.close();
  fs::rename(partial_log, log_path);

  out.checkpoint.meta["dataset_checksum"] = checksum;
  out.checkpoint.meta["test_fraction"] = spec.test_fraction;
  out.checkpoint.meta["val_fraction"] = spec.val_fraction;
  save_checkpoint(dir / "checkpoint.bin", out.checkpoint);
  write_file(result_path, result_to_json(out.result, fingerprint).dump(2) + "\n");
  return SeedRun{seed, std::move(out.result), false};
}

ReportRow VariantOutcome::report_row(const std::string& dataset_label) const {
  ReportRow row;
  row.method = variant.method;
  row.dataset = dataset_label;
  row.mode = std::string(to_string(variant.mode));
  row.rmse_mean = test_rmse.mean;
  row.rmse_std = test_rmse.std;
  row.n_seeds = test_rmse.count;
  return row;
}

StudyResult run_study(const RunSpec& base, std::span<const Variant> variants, bool include_no_skill,
                      const Progress& progress) {
  base.validate();
  if (variants.empty()) throw DomainError("no variants to run");
  const LoadedData data = load_data(base);

  std::vector<RunSpec> specs;
  std::vector<Experiment> experiments;
  StudyResult study;
  for (const auto& v : variants) {
    RunSpec spec = base;
    spec.mode = v.mode;
    spec.model.recurrent = v.cell;
    if (v.state_width_is_d_output) spec.model.recurrent_hidden = spec.model.d_output;
    spec.validate();
    experiments.push_back(prepare_experiment(data.dataset, data.split, spec.mode, spec.model));
    specs.push_back(spec);
    VariantOutcome outcome;
    outcome.variant = v;
    outcome.seeds = base.seeds;
    outcome.runs.resize(base.seeds.size());
    outcome.errors.resize(base.seeds.size());
    study.variants.push_back(std::move(outcome));
  }

  const std::size_t n_seeds = base.seeds.size();
  const std::size_t n_tasks = variants.size() * n_seeds;
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  const auto say = [&](const std::string& msg) {
    if (!progress) return;
    std::lock_guard lock(mu);
    progress(msg);
  };
  const auto worker = [&] {
    for (std::size_t t = next++; t < n_tasks; t = next++) {
      const std::size_t vi = t / n_seeds;
      const std::size_t si = t % n_seeds;
      auto& outcome = study.variants[vi];
      const std::uint64_t seed = base.seeds[si];
      const fs::path dir = fs::path(base.out) / outcome.variant.key / seed_dir_name(seed);
      try {
        auto run = run_seed(experiments[vi], specs[vi], data.checksum, seed, dir);
        say(outcome.variant.key + " seed " + std::to_string(seed) + (run.cached ? " (cached)" : "") +
            ": test RMSE " + std::to_string(run.result.test_rmse));
        outcome.runs[si] = std::move(run);
      } catch (const std::exception& e) {
        outcome.errors[si] = e.what();
        say(outcome.variant.key + " seed " + std::to_string(seed) + " failed: " + e.what());
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(base.jobs, n_tasks));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<ReportRow> rows;
  study.complete = true;
  for (auto& outcome : study.variants) {
    std::vector<double> values;
    for (const auto& run : outcome.runs) {
      if (run) values.push_back(run->result.test_rmse);
    }
    outcome.complete = values.size() == outcome.seeds.size();
    outcome.test_rmse = aggregate(values);
    study.complete = study.complete && outcome.complete;
    if (!values.empty()) rows.push_back(outcome.report_row(base.dataset_label));
  }
  study.no_skill_rmse = constant_rmse(data.dataset, data.split.test);
  if (include_no_skill) {
    ReportRow row;
    row.method = "No-skill (constant 3.0)";
    row.dataset = base.dataset_label;
    row.mode = "static";
    row.rmse_mean = study.no_skill_rmse;
    rows.push_back(row);
  }
  if (rows.empty()) return study;
  study.report = make_report(rows);

  fs::create_directories(base.out);
  write_file(fs::path(base.out) / "report.txt", render_table(study.report));
  write_file(fs::path(base.out) / "report.tsv", render_tsv(study.report));
  nlohmann::ordered_json summary{{"runspec", runspec_to_json(base)},
                                 {"dataset_checksum", data.checksum},
                                 {"no_skill_rmse", study.no_skill_rmse},
                                 {"complete", study.complete}};
  nlohmann::ordered_json vs = nlohmann::ordered_json::array();
  for (const auto& o : study.variants) {
    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < o.seeds.size(); ++i) {
      nlohmann::ordered_json r{{"seed", o.seeds[i]}};
      if (o.runs[i]) r["test_rmse"] = o.runs[i]->result.test_rmse;
      else r["error"] = o.errors[i];
      runs.push_back(r);
    }
    vs.push_back({{"key", o.variant.key},
                  {"method", o.variant.method},
                  {"mode", std::string(to_string(o.variant.mode))},
                  {"complete", o.complete},
                  {"rmse_mean", o.test_rmse.mean},
                  {"rmse_std", o.test_rmse.std ? nlohmann::ordered_json(*o.test_rmse.std) : nlohmann::ordered_json()},
                  {"runs", runs}});
  }
  summary["variants"] = vs;
  write_file(fs::path(base.out) / "summary.json", summary.dump(2) + "\n");
  return study;
}

}  // namespace tgcmc::app
