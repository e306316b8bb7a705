#include <gtest/gtest.h>

#include <algorithm>

#include "tgcmc/error.hpp"
#include "tgcmc/evaluation.hpp"
#include "tgcmc/rng.hpp"

namespace tgcmc {
namespace {

TEST(Rmse, ExactPredictionIsZero) {
  const std::vector<double> v{1, 2, 5, 4};
  EXPECT_EQ(rmse(v, v), 0.0);
}

TEST(Rmse, HandArithmetic) {
  const std::vector<double> pred{3, 3}, actual{1, 5};
  EXPECT_DOUBLE_EQ(rmse(pred, actual), 2.0);
}

TEST(Rmse, NoRoundingOrClipping) {
  const std::vector<double> pred{3.4}, actual{3.0};
  EXPECT_DOUBLE_EQ(rmse(pred, actual), 0.4);
  const std::vector<double> outside{6.0}, five{5.0};
  EXPECT_DOUBLE_EQ(rmse(outside, five), 1.0);
}

TEST(Rmse, SymmetricAndPermutationInvariant) {
  RngStream rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> pred, actual;
    for (int i = 0; i < 50; ++i) {
      pred.push_back(rng.uniform(1, 5));
      actual.push_back(static_cast<double>(1 + rng.below(5)));
    }
    const double base = rmse(pred, actual);
    EXPECT_EQ(rmse(actual, pred), base);
    std::vector<std::size_t> order(pred.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    std::vector<double> p2, a2;
    for (const auto i : order) {
      p2.push_back(pred[i]);
      a2.push_back(actual[i]);
    }
    EXPECT_NEAR(rmse(p2, a2), base, 1e-14);
  }
}

TEST(Rmse, RejectsMismatchedOrEmptyInput) {
  const std::vector<double> one{1}, two{1, 2}, none;
  EXPECT_THROW(rmse(one, two), ShapeError);
  EXPECT_THROW(rmse(none, none), DomainError);
}

ReportRow row(std::string method, std::string dataset, double mean, std::optional<double> std, std::size_t n) {
  return {std::move(method), std::move(dataset), "static", mean, std, n};
}

TEST(Report, SingleRowRoundTrip) {
  const auto report = make_report({row("GCMC (new split)", "ML-100k", 1.2259, 0.0001, 5)});
  ASSERT_EQ(report.rows.size(), 1u);
  EXPECT_EQ(report.rows[0].method, "GCMC (new split)");
  const auto table = render_table(report);
  EXPECT_NE(table.find("ML-100k"), std::string::npos);
  EXPECT_NE(table.find("1.2259 ± 0.0001"), std::string::npos);
}

TEST(Report, GroupsByDataset) {
  const auto report = make_report({row("B", "ML-1M", 1.1, 0.01, 5), row("A", "ML-100k", 1.2, 0.02, 5),
                                   row("C", "ML-100k", 1.3, std::nullopt, 1)});
  ASSERT_EQ(report.rows.size(), 3u);
  EXPECT_EQ(report.rows[0].dataset, "ML-100k");
  EXPECT_EQ(report.rows[1].dataset, "ML-100k");
  EXPECT_EQ(report.rows[2].dataset, "ML-1M");
  const auto table = render_table(report);
  const auto first = table.find("ML-100k\n");
  const auto second = table.find("ML-1M\n");
  ASSERT_NE(first, std::string::npos);
  ASSERT_NE(second, std::string::npos);
  EXPECT_LT(first, second);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 2 * 3 + 3 + 1);
  // Missing std renders the mean alone.
  EXPECT_NE(table.find("1.3000  "), std::string::npos);
}

TEST(Report, TsvHasHeaderAndEmptyStdCell) {
  const auto tsv = render_tsv(make_report({row("A", "ML-100k", 1.25, std::nullopt, 1), row("B", "ML-100k", 1.1, 0.05, 5)}));
  EXPECT_EQ(tsv,
            "method\tdataset\tmode\trmse_mean\trmse_std\tn_seeds\n"
            "A\tML-100k\tstatic\t1.250000\t\t1\n"
            "B\tML-100k\tstatic\t1.100000\t0.050000\t5\n");
}

TEST(Report, EmptyIsRejected) { EXPECT_THROW(make_report({}), DomainError); }

}  // namespace
}  // namespace tgcmc
