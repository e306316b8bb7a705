#include <benchmark/benchmark.h>

#include <memory>

#include "tgcmc/diff/ops.hpp"
#include "tgcmc/diff/tape.hpp"
#include "tgcmc/rng.hpp"

namespace {

using tgcmc::RngStream;
using tgcmc::diff::Tape;
using tgcmc::diff::Tensor;
using tgcmc::diff::Var;

Tensor random_matrix(std::size_t rows, std::size_t cols, RngStream& rng, double scale = 0.1) {
  Tensor t = Tensor::matrix(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-scale, scale);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto m = static_cast<std::size_t>(state.range(2));
  RngStream rng(1);
  const Tensor a = random_matrix(n, k, rng);
  const Tensor b = random_matrix(k, m, rng);
  for (auto _ : state) {
    Tape tape;
    Var out = tgcmc::diff::matmul(tape.parameter("a", a), tape.parameter("b", b));
    benchmark::DoNotOptimize(out.value().data());
  }
  state.counters["GFLOPs"] =
      benchmark::Counter(2.0 * n * k * m, benchmark::Counter::kIsIterationInvariantRate,
                         benchmark::Counter::kIs1000);
}
BENCHMARK(BM_Matmul)->Args({2187, 500, 500})->Args({2187, 75, 500})->Unit(benchmark::kMillisecond);

template <bool kLstm>
void BM_CellForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  const auto h = static_cast<std::size_t>(state.range(2));
  RngStream rng(2);
  const Tensor x = random_matrix(n, d, rng, 1.0);
  const Tensor h0 = random_matrix(n, kLstm ? 2 * h : h, rng, 0.5);
  std::vector<Tensor> w, u, b;
  for (int g = 0; g < (kLstm ? 4 : 3); ++g) {
    w.push_back(random_matrix(d, h, rng));
    u.push_back(random_matrix(h, h, rng));
    b.push_back(random_matrix(1, h, rng));
  }
  for (auto _ : state) {
    Tape tape;
    std::vector<Var> wv, uv, bv;
    for (std::size_t g = 0; g < w.size(); ++g) {
      wv.push_back(tape.parameter("w" + std::to_string(g), w[g]));
      uv.push_back(tape.parameter("u" + std::to_string(g), u[g]));
      bv.push_back(tape.parameter("b" + std::to_string(g), b[g]));
    }
    Var xv = tape.parameter("x", x);
    Var hv = tape.parameter("h", h0);
    Var out;
    if constexpr (kLstm) {
      out = tgcmc::diff::lstm_cell(xv, hv, {wv[0], wv[1], wv[2], wv[3], uv[0], uv[1], uv[2], uv[3],
                                            bv[0], bv[1], bv[2], bv[3]});
    } else {
      out = tgcmc::diff::gru_cell(xv, hv, {wv[0], wv[1], wv[2], uv[0], uv[1], uv[2], bv[0], bv[1], bv[2]});
    }
    auto grads = tape.backward(tgcmc::diff::sum(out));
    benchmark::DoNotOptimize(grads.size());
  }
}
BENCHMARK_TEMPLATE(BM_CellForwardBackward, false)->Args({2187, 75, 500})->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_CellForwardBackward, true)->Args({2187, 75, 500})->Unit(benchmark::kMillisecond);

void BM_GatherAccumulate(benchmark::State& state) {
  const auto n_rows = static_cast<std::size_t>(state.range(0));
  const auto per_row = static_cast<std::size_t>(state.range(1));
  const auto width = static_cast<std::size_t>(state.range(2));
  RngStream rng(3);
  const Tensor features = random_matrix(n_rows, width, rng);
  auto rows = std::make_shared<tgcmc::diff::SparseRows>();
  rows->offsets.push_back(0);
  for (std::size_t r = 0; r < n_rows; ++r) {
    for (std::size_t k = 0; k < per_row; ++k) {
      rows->indices.push_back(static_cast<std::uint32_t>(rng.below(n_rows)));
      rows->weights.push_back(1.0 / static_cast<double>(per_row));
    }
    rows->offsets.push_back(rows->indices.size());
  }
  for (auto _ : state) {
    Tape tape;
    Var out = tgcmc::diff::gather_accumulate(tape.parameter("f", features), rows);
    auto grads = tape.backward(tgcmc::diff::sum(out));
    benchmark::DoNotOptimize(grads.size());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n_rows * per_row));
}
BENCHMARK(BM_GatherAccumulate)->Args({2187, 12, 100})->Unit(benchmark::kMillisecond);

}  // namespace
