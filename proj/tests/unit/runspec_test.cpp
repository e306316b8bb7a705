#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "tgcmc/app/runspec.hpp"
#include "tgcmc/error.hpp"

namespace tgcmc::app {
namespace {

TEST(RunSpec, DefaultsMatchTheExperimentalSetup) {
  const RunSpec s;
  EXPECT_EQ(s.test_fraction, 0.2);
  EXPECT_EQ(s.val_fraction, 0.2);
  EXPECT_EQ(s.model.d_hidden, 500u);
  EXPECT_EQ(s.model.d_output, 75u);
  EXPECT_EQ(s.model.dropout, 0.7);
  EXPECT_EQ(s.model.accum, Accumulation::kConcat);
  EXPECT_EQ(s.model.norm, NormScheme::kLeft);
  EXPECT_EQ(s.model.steps, 10u);
  EXPECT_EQ(s.train.epochs, 1000u);
  EXPECT_EQ(s.train.learning_rate, 0.01);
  EXPECT_EQ(s.train.ema_decay, 0.995);
  EXPECT_EQ(s.seeds, (std::vector<std::uint64_t>{1, 2, 3, 4, 5}));
  EXPECT_NO_THROW(s.validate());
}

TEST(RunSpec, AppliesKnownKeys) {
  const auto s = apply_runspec_json({}, nlohmann::json::parse(R"({
    "mode": "incremental", "cell": "gru", "steps": 4, "accum": "sum", "norm": "symmetric",
    "epochs": 7, "learning_rate": 0.5, "seeds": [9, 8], "dataset_format": "ml1m", "jobs": 3})"));
  EXPECT_EQ(s.mode, SequenceMode::kIncremental);
  EXPECT_EQ(s.model.recurrent, RecurrentKind::kGru);
  EXPECT_EQ(s.model.steps, 4u);
  EXPECT_EQ(s.model.accum, Accumulation::kSum);
  EXPECT_EQ(s.model.norm, NormScheme::kSymmetric);
  EXPECT_EQ(s.train.epochs, 7u);
  EXPECT_EQ(s.train.learning_rate, 0.5);
  EXPECT_EQ(s.seeds, (std::vector<std::uint64_t>{9, 8}));
  EXPECT_EQ(s.format, DatasetFormat::kMl1m);
  EXPECT_EQ(s.jobs, 3u);
}

TEST(RunSpec, UnknownKeyIsNamed) {
  try {
    apply_runspec_json({}, nlohmann::json::parse(R"({"epochs": 3, "bogus": 1})"));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("'bogus'"), std::string::npos);
  }
}

TEST(RunSpec, BadValuesAreConfigErrors) {
  EXPECT_THROW(apply_runspec_json({}, nlohmann::json::parse(R"({"epochs": "many"})")), ConfigError);
  EXPECT_THROW(apply_runspec_json({}, nlohmann::json::parse(R"({"cell": "rnn"})")), ConfigError);
  EXPECT_THROW(apply_runspec_json({}, nlohmann::json::parse(R"([1, 2])")), ConfigError);
}

TEST(RunSpec, ValidateRejectsMismatchedModeAndCell) {
  RunSpec s;
  s.mode = SequenceMode::kDisjoint;
  EXPECT_THROW(s.validate(), ConfigError);
  s.model.recurrent = RecurrentKind::kLstm;
  EXPECT_NO_THROW(s.validate());
  s.mode = SequenceMode::kStatic;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.seeds.clear();
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.test_fraction = 1.0;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(RunSpec, JsonRoundTripCoversEveryKey) {
  RunSpec s;
  s.mode = SequenceMode::kDisjoint;
  s.model.recurrent = RecurrentKind::kLstm;
  s.model.dropout = 0.3;
  s.train.eval_every = 7;
  s.dataset = "x.data";
  const auto j = runspec_to_json(s);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, runspec_keys());
  const auto back = apply_runspec_json({}, nlohmann::json::parse(j.dump()));
  EXPECT_EQ(runspec_to_json(back), j);
}

TEST(RunSpec, LoadFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "tgcmc_runspec_test.json";
  std::ofstream(path) << R"({"epochs": 12, "dropout": 0.5})";
  const auto s = load_runspec(path);
  EXPECT_EQ(s.train.epochs, 12u);
  EXPECT_EQ(s.model.dropout, 0.5);
  std::ofstream(path) << "{not json";
  EXPECT_THROW(load_runspec(path), ConfigError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_runspec(path), Error);
}

TEST(Fingerprint, DependsOnOutcomeInputsOnly) {
  RunSpec s;
  const auto base = run_fingerprint(s, "abc", 1);
  EXPECT_EQ(base, run_fingerprint(s, "abc", 1));
  EXPECT_NE(base, run_fingerprint(s, "abc", 2));
  EXPECT_NE(base, run_fingerprint(s, "abd", 1));
  RunSpec t = s;
  t.out = "elsewhere";
  t.jobs = 4;
  t.seeds = {1};
  t.dataset = "/other/path";
  EXPECT_EQ(run_fingerprint(t, "abc", 1), base);
  t.train.epochs = 999;
  EXPECT_NE(run_fingerprint(t, "abc", 1), base);
  t = s;
  t.model.dropout = 0.5;
  EXPECT_NE(run_fingerprint(t, "abc", 1), base);
}

}  // namespace
}  // namespace tgcmc::app
