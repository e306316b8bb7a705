#ifndef TGCMC_EVALUATION_HPP_
#define TGCMC_EVALUATION_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tgcmc {

// sqrt(mean((predicted - actual)^2)); no rounding or clipping.
double rmse(std::span<const double> predicted, std::span<const double> actual);

struct ReportRow {
  std::string method;   // e.g. "GCMC-GRU‡"
  std::string dataset;  // e.g. "ML-100k"
  std::string mode;     // static | disjoint | incremental
  double rmse_mean = 0.0;
  std::optional<double> rmse_std;
  std::size_t n_seeds = 0;
};

struct EvalReport {
  std::vector<ReportRow> rows;  // sorted by (dataset, method)
};

EvalReport make_report(std::vector<ReportRow> rows);

// Aligned plain text, one section per dataset.
std::string render_table(const EvalReport& report);
// Tab-separated with header: method dataset mode rmse_mean rmse_std n_seeds.
std::string render_tsv(const EvalReport& report);

}  // namespace tgcmc

#endif  // TGCMC_EVALUATION_HPP_
