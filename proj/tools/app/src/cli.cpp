#include "tgcmc/app/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <optional>

#include "tgcmc/app/runner.hpp"
#include "tgcmc/app/runspec.hpp"
#include "tgcmc/checkpoint.hpp"
#include "tgcmc/error.hpp"
#include "tgcmc/gradcheck.hpp"

namespace tgcmc::app {
namespace {

// Flags that override RunSpec fields. Unset flags leave the config alone.
struct RunFlags {
  std::string config;
  std::optional<std::string> dataset;
  std::optional<std::string> dataset_format;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
  std::optional<std::size_t> jobs;
  std::optional<std::string> mode;
  std::optional<std::string> cell;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> eval_every;
  std::optional<double> dropout;
  std::optional<std::size_t> d_hidden;
  std::optional<std::size_t> d_output;
  std::optional<std::size_t> recurrent_hidden;
  std::optional<std::string> accum;
  std::optional<std::string> norm;
  std::optional<double> learning_rate;
};

void add_data_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration (flags override it)");
  cmd->add_option("--dataset", f.dataset, "Ratings file");
  cmd->add_option("--dataset-format", f.dataset_format, "ml100k or ml1m")
      ->check(CLI::IsMember({"ml100k", "ml1m"}));
}

void add_run_flags(CLI::App* cmd, RunFlags& f, bool model_flags) {
  add_data_flags(cmd, f);
  cmd->add_option("--out", f.out, "Output directory");
  auto* seed = cmd->add_option("--seed", f.seed, "Single seed");
  cmd->add_option("--seeds", f.seeds, "Comma-separated seeds")->delimiter(',')->excludes(seed);
  cmd->add_option("--jobs", f.jobs, "Concurrent runs")->check(CLI::PositiveNumber);
  cmd->add_option("--epochs", f.epochs, "Training epochs");
  cmd->add_option("--eval-every", f.eval_every, "Epochs between validation RMSE logs");
  if (!model_flags) return;
  cmd->add_option("--mode", f.mode, "static, disjoint or incremental");
  cmd->add_option("--cell", f.cell, "none, gru or lstm");
  cmd->add_option("--steps", f.steps, "Sequence length T");
  cmd->add_option("--dropout", f.dropout, "Dropout probability");
  cmd->add_option("--d-hidden", f.d_hidden, "Encoder hidden width");
  cmd->add_option("--d-output", f.d_output, "Encoder output width");
  cmd->add_option("--recurrent-hidden", f.recurrent_hidden, "Recurrent state width");
  cmd->add_option("--accum", f.accum, "concat or sum");
  cmd->add_option("--norm", f.norm, "left or symmetric");
  cmd->add_option("--learning-rate", f.learning_rate, "Adam learning rate");
}

RunSpec resolve(const RunFlags& f) {
  RunSpec spec;
  if (!f.config.empty()) spec = load_runspec(f.config, spec);
  nlohmann::json o = nlohmann::json::object();
  if (f.dataset) o["dataset"] = *f.dataset;
  if (f.dataset_format) o["dataset_format"] = *f.dataset_format;
  if (f.out) o["out"] = *f.out;
  if (f.seed) o["seeds"] = std::vector<std::uint64_t>{*f.seed};
  if (!f.seeds.empty()) o["seeds"] = f.seeds;
  if (f.jobs) o["jobs"] = *f.jobs;
  if (f.mode) o["mode"] = *f.mode;
  if (f.cell) o["cell"] = *f.cell;
  if (f.steps) o["steps"] = *f.steps;
  if (f.epochs) o["epochs"] = *f.epochs;
  if (f.eval_every) o["eval_every"] = *f.eval_every;
  if (f.dropout) o["dropout"] = *f.dropout;
  if (f.d_hidden) o["d_hidden"] = *f.d_hidden;
  if (f.d_output) o["d_output"] = *f.d_output;
  if (f.recurrent_hidden) o["recurrent_hidden"] = *f.recurrent_hidden;
  if (f.accum) o["accum"] = *f.accum;
  if (f.norm) o["norm"] = *f.norm;
  if (f.learning_rate) o["learning_rate"] = *f.learning_rate;
  spec = apply_runspec_json(std::move(spec), o);
  if (spec.format == DatasetFormat::kMl1m && spec.dataset_label == "ML-100k") {
    spec.dataset_label = "ML-1M";
  }
  return spec;
}

int cmd_split(const RunFlags& f, const std::string& out_path, std::ostream& out) {
  const RunSpec spec = resolve(f);
  if (spec.dataset.empty()) throw ConfigError("split needs --dataset");
  const auto data = load_data(spec);
  const auto manifest = make_manifest(data.dataset, data.split, spec.dataset, spec.format);
  const std::string text = manifest_to_json(manifest);
  if (out_path.empty() || out_path == "-") {
    out << text << '\n';
  } else {
    std::ofstream file(out_path, std::ios::trunc);
    if (!file) throw Error("cannot write " + out_path);
    file << text << '\n';
    out << "train " << data.split.train.size() << ", val " << data.split.val.size() << ", test "
        << data.split.test.size() << " -> " << out_path << '\n';
  }
  return kExitOk;
}

int study(const RunSpec& spec, std::span<const Variant> variants, bool no_skill, std::ostream& out,
          std::ostream& err) {
  const auto result = run_study(spec, variants, no_skill, [&err](const std::string& m) { err << m << '\n'; });
  if (!result.report.rows.empty()) out << render_table(result.report);
  if (!result.complete) {
    err << "some runs failed; see " << spec.out << "/summary.json\n";
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_train(const RunFlags& f, std::ostream& out, std::ostream& err) {
  const RunSpec spec = resolve(f);
  spec.validate();
  const Variant v = variant_of(spec);
  return study(spec, std::span<const Variant>(&v, 1), false, out, err);
}

int cmd_reproduce(const RunFlags& f, const std::vector<std::string>& keys, std::ostream& out,
                  std::ostream& err) {
  const RunSpec spec = resolve(f);
  std::vector<Variant> variants;
  if (keys.empty()) {
    variants = table_variants();
  } else {
    for (const auto& k : keys) variants.push_back(find_variant(k));
  }
  return study(spec, variants, true, out, err);
}

int cmd_evaluate(const RunFlags& f, const std::string& checkpoint_path, const std::string& which,
                 std::ostream& out) {
  RunSpec spec = resolve(f);
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  if (ckpt.meta.contains("test_fraction")) spec.test_fraction = ckpt.meta["test_fraction"].get<double>();
  if (ckpt.meta.contains("val_fraction")) spec.val_fraction = ckpt.meta["val_fraction"].get<double>();
  const auto data = load_data(spec);
  if (ckpt.meta.contains("dataset_checksum") &&
      ckpt.meta["dataset_checksum"].get<std::string>() != data.checksum) {
    throw ConfigError("checkpoint was trained on a different dataset (checksum mismatch)");
  }
  const SequenceMode mode = parse_sequence_mode(ckpt.meta.value("mode", std::string("static")));
  const Experiment ex = prepare_experiment(data.dataset, data.split, mode, ckpt.config);
  if (ex.model.n_users != ckpt.config.n_users || ex.model.n_items != ckpt.config.n_items) {
    throw ConfigError("checkpoint node counts do not match the dataset");
  }
  const std::vector<Edge>* edges = &ex.test;
  if (which == "val") edges = &ex.val;
  if (which == "train") edges = &ex.train;
  const double value = evaluate_rmse(ckpt.ema, ckpt.config, ex.graph, *edges);
  char line[128];
  std::snprintf(line, sizeof(line), "%s RMSE %.6f over %zu ratings\n", which.c_str(), value, edges->size());
  out << line;
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t size, std::size_t max_size, std::size_t instances,
                  const std::string& flip, std::ostream& out, std::ostream& err) {
  if (size > max_size) {
    err << "size " << size << " exceeds the finite-difference cap of " << max_size
        << "; every parameter costs two forward passes\n";
    return kExitUsage;
  }
  if (size < 2) {
    err << "size must be at least 2\n";
    return kExitUsage;
  }
  SuiteOptions opts;
  opts.seed = seed;
  opts.size = size;
  opts.instances = instances;
  opts.check.flip_sign_of = flip;
  const auto suite = run_gradcheck_suite(opts);
  std::size_t n_fail = 0;
  for (std::size_t i = 0; i < suite.instances.size(); ++i) {
    const auto& inst = suite.instances[i];
    double worst = 0.0;
    for (const auto& p : inst.report.parameters) worst = std::max(worst, p.max_rel_error);
    char line[256];
    std::snprintf(line, sizeof(line), "instance %2zu  %-4s %-6s %-9s %-11s T=%zu  %zux%zu %2zu edges  max rel err %.2e  %s\n",
                  i, std::string(to_string(inst.spec.recurrent)).c_str(),
                  std::string(to_string(inst.spec.accum)).c_str(),
                  std::string(to_string(inst.spec.norm)).c_str(),
                  std::string(to_string(inst.spec.mode)).c_str(), inst.spec.steps, inst.n_users,
                  inst.n_items, inst.n_edges, worst, inst.report.passed() ? "pass" : "FAIL");
    out << line;
    for (const auto& p : inst.report.parameters) {
      if (p.passed) continue;
      ++n_fail;
      std::snprintf(line, sizeof(line), "  %s: rel err %.3e at element %zu (analytic %.6e, numeric %.6e)\n",
                    p.name.c_str(), p.max_rel_error, p.worst_index, p.analytic, p.numeric);
      out << line;
    }
  }
  out << (suite.passed() ? "gradcheck passed" : "gradcheck FAILED") << ": " << suite.instances.size()
      << " instances, " << n_fail << " failing parameter checks\n";
  return suite.passed() ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph-convolutional matrix completion on temporal rating graphs", "tgcmc"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tgcmc 0.1.0");

  RunFlags split_f, train_f, eval_f, repro_f;
  std::string manifest_out, checkpoint_path, which = "test", flip;
  std::vector<std::string> variant_keys;
  std::uint64_t gc_seed = 1;
  std::size_t gc_size = 8, gc_max = 10, gc_instances = 24;

  auto* split = app.add_subcommand("split", "Chronological train/val/test split and manifest");
  add_data_flags(split, split_f);
  split->add_option("--out", manifest_out, "Manifest path (stdout if omitted)");

  auto* train = app.add_subcommand("train", "Train one configuration over one or more seeds");
  add_run_flags(train, train_f, true);

  auto* evaluate = app.add_subcommand("evaluate", "RMSE of a checkpoint's EMA parameters");
  add_data_flags(evaluate, eval_f);
  evaluate->add_option("--checkpoint", checkpoint_path, "checkpoint.bin from a run")->required();
  evaluate->add_option("--split", which, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));

  auto* reproduce = app.add_subcommand("reproduce", "Train every table variant and write the report");
  add_run_flags(reproduce, repro_f, false);
  reproduce->add_option("--variants", variant_keys,
                        "Subset of static,lstm-disjoint,gru-disjoint,lstm-incremental,gru-incremental")
      ->delimiter(',');

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every parameter gradient");
  gradcheck->add_option("--seed", gc_seed, "Instance seed");
  gradcheck->add_option("--size", gc_size, "Maximum users and items per instance");
  gradcheck->add_option("--max-size", gc_max, "Refuse sizes above this");
  gradcheck->add_option("--instances", gc_instances, "Number of random instances");
  gradcheck->add_option("--inject-sign-flip", flip, "Negate one parameter's gradient (harness self-test)")
      ->group("");

  std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << "tgcmc 0.1.0\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "tgcmc: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*split) return cmd_split(split_f, manifest_out, out);
    if (*train) return cmd_train(train_f, out, err);
    if (*evaluate) return cmd_evaluate(eval_f, checkpoint_path, which, out);
    if (*reproduce) return cmd_reproduce(repro_f, variant_keys, out, err);
    if (*gradcheck) return cmd_gradcheck(gc_seed, gc_size, gc_max, gc_instances, flip, out, err);
  } catch (const ConfigError& e) {
    err << "tgcmc: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "tgcmc: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace tgcmc::app
