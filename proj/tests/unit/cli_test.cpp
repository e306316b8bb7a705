#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "tgcmc/app/cli.hpp"
#include "tgcmc/checkpoint.hpp"
#include "tgcmc/synthetic.hpp"

namespace tgcmc::app {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "tgcmc");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Drops the timing field from every log line.
std::string strip_wall(const std::string& log) {
  std::istringstream in(log);
  std::string line, out;
  while (std::getline(in, line)) {
    auto j = nlohmann::ordered_json::parse(line);
    j.erase("wall_ms");
    out += j.dump() + "\n";
  }
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("tgcmc_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    data_ = (dir_ / "u.data").string();
    std::ofstream f(data_);
    for (const auto& r : planted_factor_ratings(30, 25, 300, 2, 4)) {
      f << r.user_raw << '\t' << r.item_raw << '\t' << r.rating << '\t' << r.timestamp << '\n';
    }
    config_ = (dir_ / "small.json").string();
    std::ofstream(config_) << R"({"d_hidden": 10, "d_output": 4, "recurrent_hidden": 3, "steps": 3,
                                  "epochs": 4, "eval_every": 2})";
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::vector<std::string> train_args(const std::string& out) {
    return {"train", "--config", config_, "--dataset", data_, "--out", out, "--seeds", "1,2"};
  }

  fs::path dir_;
  std::string data_;
  std::string config_;
};

TEST_F(CliTest, NoCommandIsUsageError) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
}

TEST_F(CliTest, SplitPrintsDeterministicManifest) {
  const auto a = run({"split", "--dataset", data_});
  ASSERT_EQ(a.code, kExitOk) << a.err;
  const auto j = nlohmann::json::parse(a.out);
  EXPECT_EQ(j.at("n_ratings"), 300);
  EXPECT_EQ(run({"split", "--dataset", data_}).out, a.out);
  const auto path = (dir_ / "manifest.json").string();
  const auto b = run({"split", "--dataset", data_, "--out", path});
  ASSERT_EQ(b.code, kExitOk);
  EXPECT_NE(b.out.find("train 192, val 48, test 60"), std::string::npos);
  EXPECT_EQ(read_file(path), a.out);
}

TEST_F(CliTest, MissingDatasetFileFails) {
  const auto r = run({"split", "--dataset", (dir_ / "absent.data").string()});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_FALSE(r.err.empty());
  EXPECT_EQ(run({"split"}).code, kExitUsage);
}

TEST_F(CliTest, TrainWritesArtifactsPerSeedAndReusesThem) {
  const auto out = (dir_ / "runs").string();
  const auto r = run(train_args(out));
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* seed : {"seed-1", "seed-2"}) {
    const auto d = fs::path(out) / "static" / seed;
    EXPECT_TRUE(fs::exists(d / "result.json"));
    EXPECT_TRUE(fs::exists(d / "checkpoint.bin"));
    std::istringstream log(read_file(d / "train_log.jsonl"));
    std::string line;
    std::size_t lines = 0;
    while (std::getline(log, line)) ++lines;
    EXPECT_EQ(lines, 4u);
  }
  EXPECT_TRUE(fs::exists(fs::path(out) / "report.tsv"));
  EXPECT_TRUE(fs::exists(fs::path(out) / "summary.json"));
  EXPECT_NE(r.out.find("GCMC (new split)"), std::string::npos);

  const auto again = run(train_args(out));
  EXPECT_EQ(again.code, kExitOk);
  EXPECT_NE(again.err.find("(cached)"), std::string::npos);
  EXPECT_EQ(again.out, r.out);
}

TEST_F(CliTest, IdenticalRunsGiveIdenticalLogsAndCheckpoints) {
  const auto a = (dir_ / "a").string(), b = (dir_ / "b").string();
  auto args = train_args(a);
  args.insert(args.end(), {"--mode", "incremental", "--cell", "gru"});
  ASSERT_EQ(run(args).code, kExitOk);
  args[6] = b;
  ASSERT_EQ(run(args).code, kExitOk);
  for (const char* seed : {"seed-1", "seed-2"}) {
    const auto da = fs::path(a) / "gru-incremental" / seed, db = fs::path(b) / "gru-incremental" / seed;
    EXPECT_EQ(read_file(da / "checkpoint.bin"), read_file(db / "checkpoint.bin"));
    EXPECT_EQ(strip_wall(read_file(da / "train_log.jsonl")), strip_wall(read_file(db / "train_log.jsonl")));
  }
}

TEST_F(CliTest, ConfigErrorsAreUsageErrors) {
  const auto bad = (dir_ / "bad.json").string();
  std::ofstream(bad) << R"({"epochs": 3, "bogus": true})";
  const auto r = run({"train", "--config", bad, "--dataset", data_, "--out", (dir_ / "x").string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("bogus"), std::string::npos);

  const auto d = run({"train", "--dataset", data_, "--mode", "disjoint", "--cell", "none"});
  EXPECT_EQ(d.code, kExitUsage);
  EXPECT_FALSE(d.err.empty());
  EXPECT_EQ(run({"train", "--dataset", data_, "--seed", "1", "--seeds", "1,2"}).code, kExitUsage);
  EXPECT_EQ(run({"train", "--dataset", data_, "--dataset-format", "netflix"}).code, kExitUsage);
}

TEST_F(CliTest, EvaluateReproducesTheStoredTestRmse) {
  const auto out = (dir_ / "runs").string();
  auto args = train_args(out);
  args.insert(args.end(), {"--mode", "disjoint", "--cell", "lstm"});
  ASSERT_EQ(run(args).code, kExitOk);
  const auto seed_dir = fs::path(out) / "lstm-disjoint" / "seed-2";
  const auto result = nlohmann::json::parse(read_file(seed_dir / "result.json"));
  const auto r = run({"evaluate", "--dataset", data_, "--checkpoint", (seed_dir / "checkpoint.bin").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  char expected[64];
  std::snprintf(expected, sizeof(expected), "test RMSE %.6f", result.at("test_rmse").get<double>());
  EXPECT_NE(r.out.find(expected), std::string::npos) << r.out;

  // A different dataset is refused.
  const auto other = (dir_ / "other.data").string();
  std::ofstream(other) << read_file(data_) << "999\t999\t5\t1\n";
  EXPECT_EQ(run({"evaluate", "--dataset", other, "--checkpoint", (seed_dir / "checkpoint.bin").string()}).code,
            kExitUsage);
}

TEST_F(CliTest, ReproduceSingleSeedOmitsStd) {
  const auto out = (dir_ / "study").string();
  const auto r = run({"reproduce", "--config", config_, "--dataset", data_, "--out", out, "--seeds", "1",
                      "--variants", "static,gru-incremental"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("GCMC-GRU‡"), std::string::npos);
  EXPECT_NE(r.out.find("No-skill (constant 3.0)"), std::string::npos);
  EXPECT_EQ(r.out.find("±"), std::string::npos);
  const auto tsv = read_file(fs::path(out) / "report.tsv");
  EXPECT_EQ(std::count(tsv.begin(), tsv.end(), '\n'), 4);
  // Table variants size the recurrent state to d_output (4 here, config says 3).
  const auto ckpt = load_checkpoint(fs::path(out) / "gru-incremental" / "seed-1" / "checkpoint.bin");
  EXPECT_EQ(ckpt.config.recurrent_hidden, 4u);
  EXPECT_EQ(run({"reproduce", "--dataset", data_, "--variants", "nope"}).code, kExitUsage);
}

TEST_F(CliTest, Gradcheck) {
  const auto ok = run({"gradcheck", "--instances", "3"});
  EXPECT_EQ(ok.code, kExitOk) << ok.out;
  EXPECT_NE(ok.out.find("gradcheck passed"), std::string::npos);

  const auto flipped = run({"gradcheck", "--instances", "1", "--inject-sign-flip", "decoder.coeff"});
  EXPECT_EQ(flipped.code, kExitFailure);
  EXPECT_NE(flipped.out.find("decoder.coeff"), std::string::npos);
  EXPECT_NE(flipped.out.find("gradcheck FAILED"), std::string::npos);

  const auto big = run({"gradcheck", "--size", "11"});
  EXPECT_EQ(big.code, kExitUsage);
  EXPECT_NE(big.err.find("exceeds"), std::string::npos);
}

}  // namespace
}  // namespace tgcmc::app
