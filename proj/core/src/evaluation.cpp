#include "tgcmc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "tgcmc/error.hpp"

namespace tgcmc {

double rmse(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size()) throw ShapeError("rmse: inputs differ in length");
  if (predicted.empty()) throw DomainError("rmse of an empty set");
  double ss = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - actual[i];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(predicted.size()));
}

EvalReport make_report(std::vector<ReportRow> rows) {
  if (rows.empty()) throw DomainError("report needs at least one row");
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    if (a.dataset != b.dataset) return a.dataset < b.dataset;
    return a.method < b.method;
  });
  return EvalReport{std::move(rows)};
}

namespace {

// Display width of UTF-8 text (code points, no wide glyphs expected).
std::size_t display_width(const std::string& s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::string pad(const std::string& s, std::size_t width) {
  const std::size_t w = display_width(s);
  return w >= width ? s : s + std::string(width - w, ' ');
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string rmse_cell(const ReportRow& row) {
  std::string s = fixed4(row.rmse_mean);
  if (row.rmse_std) s += " ± " + fixed4(*row.rmse_std);
  return s;
}

}  // namespace

std::string render_table(const EvalReport& report) {
  std::size_t method_w = display_width("Method");
  std::size_t mode_w = display_width("Mode");
  std::size_t rmse_w = display_width("RMSE");
  for (const auto& row : report.rows) {
    method_w = std::max(method_w, display_width(row.method));
    mode_w = std::max(mode_w, display_width(row.mode));
    rmse_w = std::max(rmse_w, display_width(rmse_cell(row)));
  }
  std::string out;
  std::string current;
  for (const auto& row : report.rows) {
    if (row.dataset != current) {
      if (!current.empty()) out += "\n";
      current = row.dataset;
      out += row.dataset + "\n";
      out += pad("Method", method_w) + "  " + pad("Mode", mode_w) + "  " + pad("RMSE", rmse_w) +
             "  Seeds\n";
      out += std::string(method_w + mode_w + rmse_w + 11, '-') + "\n";
    }
    out += pad(row.method, method_w) + "  " + pad(row.mode, mode_w) + "  " +
           pad(rmse_cell(row), rmse_w) + "  " + std::to_string(row.n_seeds) + "\n";
  }
  return out;
}

std::string render_tsv(const EvalReport& report) {
  std::string out = "method\tdataset\tmode\trmse_mean\trmse_std\tn_seeds\n";
  char buf[64];
  for (const auto& row : report.rows) {
    std::snprintf(buf, sizeof(buf), "%.6f", row.rmse_mean);
    out += row.method + "\t" + row.dataset + "\t" + row.mode + "\t" + buf + "\t";
    if (row.rmse_std) {
      std::snprintf(buf, sizeof(buf), "%.6f", *row.rmse_std);
      out += buf;
    }
    out += "\t" + std::to_string(row.n_seeds) + "\n";
  }
  return out;
}

}  // namespace tgcmc
