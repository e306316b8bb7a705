#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "tgcmc/diff/ops.hpp"
#include "tgcmc/model.hpp"

namespace tgcmc {
namespace {

using diff::Tape;
using diff::Var;
using testing::fd_max_rel_error;
using testing::random_tensor;

constexpr std::size_t kIn = 3;
constexpr std::size_t kHidden = 4;
constexpr std::size_t kRows = 5;

// Leaves: x, state, then the cell weights in struct order.
std::vector<Tensor> gru_leaves(std::uint64_t seed, bool zero_state) {
  RngStream rng(seed);
  std::vector<Tensor> v{random_tensor(kRows, kIn, rng),
                        zero_state ? Tensor::matrix(kRows, kHidden) : random_tensor(kRows, kHidden, rng)};
  for (int i = 0; i < 3; ++i) v.push_back(random_tensor(kIn, kHidden, rng));
  for (int i = 0; i < 3; ++i) v.push_back(random_tensor(kHidden, kHidden, rng));
  for (int i = 0; i < 3; ++i) v.push_back(random_tensor(1, kHidden, rng));
  return v;
}

std::vector<Tensor> lstm_leaves(std::uint64_t seed, bool zero_state) {
  RngStream rng(seed);
  std::vector<Tensor> v{random_tensor(kRows, kIn, rng),
                        zero_state ? Tensor::matrix(kRows, 2 * kHidden) : random_tensor(kRows, 2 * kHidden, rng)};
  for (int i = 0; i < 4; ++i) v.push_back(random_tensor(kIn, kHidden, rng));
  for (int i = 0; i < 4; ++i) v.push_back(random_tensor(kHidden, kHidden, rng));
  for (int i = 0; i < 4; ++i) v.push_back(random_tensor(1, kHidden, rng));
  return v;
}

diff::GruWeights gru_weights(const std::vector<Var>& v) {
  return {v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10]};
}

diff::LstmWeights lstm_weights(const std::vector<Var>& v) {
  return {v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10], v[11], v[12], v[13]};
}

Var affine(Var x, Var h, Var w, Var u, Var b) {
  return diff::add_row(diff::add(diff::matmul(x, w), diff::matmul(h, u)), b);
}

// The same cells assembled from primitive ops.
Var composed_gru(Var x, Var h, const diff::GruWeights& w) {
  const Var z = diff::sigmoid(affine(x, h, w.w_update, w.u_update, w.b_update));
  const Var r = diff::sigmoid(affine(x, h, w.w_reset, w.u_reset, w.b_reset));
  const Var n = diff::tanh(affine(x, diff::mul(r, h), w.w_candidate, w.u_candidate, w.b_candidate));
  return diff::add(diff::mul(z, h), diff::sub(n, diff::mul(z, n)));
}

Var composed_lstm(Var x, Var state, const diff::LstmWeights& w) {
  const std::size_t hidden = w.u_input.value().rows();
  const Var h = diff::slice_cols(state, 0, hidden);
  const Var c = diff::slice_cols(state, hidden, 2 * hidden);
  const Var i = diff::sigmoid(affine(x, h, w.w_input, w.u_input, w.b_input));
  const Var f = diff::sigmoid(affine(x, h, w.w_forget, w.u_forget, w.b_forget));
  const Var o = diff::sigmoid(affine(x, h, w.w_output, w.u_output, w.b_output));
  const Var g = diff::tanh(affine(x, h, w.w_cell, w.u_cell, w.b_cell));
  const Var c2 = diff::add(diff::mul(f, c), diff::mul(i, g));
  return diff::concat_cols({diff::mul(o, diff::tanh(c2)), c2});
}

Var probe(Var x) {
  Tensor w = Tensor::matrix(x.value().rows(), x.value().cols());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.5 + 0.13 * static_cast<double>(i % 5);
  return diff::sum(diff::mul(x, x.tape().constant(w)));
}

TEST(GruCell, ZeroWeightsHalveTheState) {
  Tape tape;
  const Var zero_w = tape.constant(Tensor::matrix(kIn, kHidden));
  const Var zero_u = tape.constant(Tensor::matrix(kHidden, kHidden));
  const Var zero_b = tape.constant(Tensor::matrix(1, kHidden));
  const diff::GruWeights w{zero_w, zero_w, zero_w, zero_u, zero_u, zero_u, zero_b, zero_b, zero_b};
  RngStream rng(1);
  const Tensor h = random_tensor(kRows, kHidden, rng);
  const Tensor out = diff::gru_cell(tape.constant(random_tensor(kRows, kIn, rng)), tape.constant(h), w).value();
  for (std::size_t i = 0; i < h.size(); ++i) EXPECT_DOUBLE_EQ(out[i], 0.5 * h[i]);
}

TEST(LstmCell, ZeroWeightsGiveClosedForm) {
  Tape tape;
  const Var zero_w = tape.constant(Tensor::matrix(kIn, kHidden));
  const Var zero_u = tape.constant(Tensor::matrix(kHidden, kHidden));
  const Var zero_b = tape.constant(Tensor::matrix(1, kHidden));
  const diff::LstmWeights w{zero_w, zero_w, zero_w, zero_w, zero_u, zero_u,
                            zero_u, zero_u, zero_b, zero_b, zero_b, zero_b};
  RngStream rng(2);
  const Tensor state = random_tensor(kRows, 2 * kHidden, rng);
  const Tensor out = diff::lstm_cell(tape.constant(random_tensor(kRows, kIn, rng)), tape.constant(state), w).value();
  for (std::size_t r = 0; r < kRows; ++r) {
    for (std::size_t k = 0; k < kHidden; ++k) {
      const double c2 = 0.5 * state(r, kHidden + k);
      EXPECT_DOUBLE_EQ(out(r, kHidden + k), c2);
      EXPECT_DOUBLE_EQ(out(r, k), 0.5 * std::tanh(c2));
    }
  }
}

TEST(GruCell, MatchesComposedPrimitivesAndNaiveLoop) {
  for (const bool zero_state : {false, true}) {
    const auto leaves = gru_leaves(3, zero_state);
    Tape fused_tape, composed_tape;
    std::vector<Var> a, b;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      a.push_back(fused_tape.parameter("p" + std::to_string(i), leaves[i]));
      b.push_back(composed_tape.parameter("p" + std::to_string(i), leaves[i]));
    }
    const Var fused = diff::gru_cell(a[0], a[1], gru_weights(a));
    const Var composed = composed_gru(b[0], b[1], gru_weights(b));
    for (std::size_t i = 0; i < fused.value().size(); ++i) {
      EXPECT_NEAR(fused.value()[i], composed.value()[i], 1e-14);
    }
    const auto ga = fused_tape.backward(probe(fused));
    const auto gb = composed_tape.backward(probe(composed));
    for (const auto& [name, g] : ga) {
      for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], gb.at(name)[i], 1e-13) << name;
    }

    ModelParameters p;
    const char* names[] = {"gru.w_update", "gru.w_reset", "gru.w_candidate", "gru.u_update", "gru.u_reset",
                           "gru.u_candidate", "gru.b_update", "gru.b_reset", "gru.b_candidate"};
    for (int i = 0; i < 9; ++i) p.add(names[i], leaves[2 + i]);
    const Tensor step = gru_step(p, leaves[0], leaves[1]);
    for (std::size_t r = 0; r < kRows; ++r) {
      std::vector<double> x(kIn), h(kHidden);
      for (std::size_t k = 0; k < kIn; ++k) x[k] = leaves[0](r, k);
      for (std::size_t k = 0; k < kHidden; ++k) h[k] = leaves[1](r, k);
      const auto expected = testing::naive_gru(p, x, h);
      for (std::size_t k = 0; k < kHidden; ++k) EXPECT_NEAR(step(r, k), expected[k], 1e-14);
    }
  }
}

TEST(LstmCell, MatchesComposedPrimitivesAndNaiveLoop) {
  for (const bool zero_state : {false, true}) {
    const auto leaves = lstm_leaves(4, zero_state);
    Tape fused_tape, composed_tape;
    std::vector<Var> a, b;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      a.push_back(fused_tape.parameter("p" + std::to_string(i), leaves[i]));
      b.push_back(composed_tape.parameter("p" + std::to_string(i), leaves[i]));
    }
    const Var fused = diff::lstm_cell(a[0], a[1], lstm_weights(a));
    const Var composed = composed_lstm(b[0], b[1], lstm_weights(b));
    for (std::size_t i = 0; i < fused.value().size(); ++i) {
      EXPECT_NEAR(fused.value()[i], composed.value()[i], 1e-14);
    }
    const auto ga = fused_tape.backward(probe(fused));
    const auto gb = composed_tape.backward(probe(composed));
    for (const auto& [name, g] : ga) {
      for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], gb.at(name)[i], 1e-13) << name;
    }

    ModelParameters p;
    const char* gates[] = {"input", "forget", "output", "cell"};
    for (int i = 0; i < 4; ++i) p.add(std::string("lstm.w_") + gates[i], leaves[2 + i]);
    for (int i = 0; i < 4; ++i) p.add(std::string("lstm.u_") + gates[i], leaves[6 + i]);
    for (int i = 0; i < 4; ++i) p.add(std::string("lstm.b_") + gates[i], leaves[10 + i]);
    Tensor h0 = Tensor::matrix(kRows, kHidden), c0 = Tensor::matrix(kRows, kHidden);
    for (std::size_t r = 0; r < kRows; ++r) {
      for (std::size_t k = 0; k < kHidden; ++k) {
        h0(r, k) = leaves[1](r, k);
        c0(r, k) = leaves[1](r, kHidden + k);
      }
    }
    const auto [h1, c1] = lstm_step(p, leaves[0], h0, c0);
    for (std::size_t r = 0; r < kRows; ++r) {
      std::vector<double> x(kIn), h(kHidden), c(kHidden);
      for (std::size_t k = 0; k < kIn; ++k) x[k] = leaves[0](r, k);
      for (std::size_t k = 0; k < kHidden; ++k) {
        h[k] = h0(r, k);
        c[k] = c0(r, k);
      }
      const auto [eh, ec] = testing::naive_lstm(p, x, h, c);
      for (std::size_t k = 0; k < kHidden; ++k) {
        EXPECT_NEAR(h1(r, k), eh[k], 1e-14);
        EXPECT_NEAR(c1(r, k), ec[k], 1e-14);
      }
    }
  }
}

TEST(GruCell, GradientMatchesFiniteDifferences) {
  for (const bool zero_state : {false, true}) {
    EXPECT_LT(fd_max_rel_error(gru_leaves(5, zero_state),
                               [](Tape&, const std::vector<Var>& v) {
                                 return probe(diff::gru_cell(v[0], v[1], gru_weights(v)));
                               }),
              1e-6)
        << "zero_state=" << zero_state;
  }
}

TEST(LstmCell, GradientMatchesFiniteDifferences) {
  for (const bool zero_state : {false, true}) {
    EXPECT_LT(fd_max_rel_error(lstm_leaves(6, zero_state),
                               [](Tape&, const std::vector<Var>& v) {
                                 return probe(diff::lstm_cell(v[0], v[1], lstm_weights(v)));
                               }),
              1e-6)
        << "zero_state=" << zero_state;
  }
}

TEST(Cells, TwoChainedStepsGradientMatchesFiniteDifferences) {
  // The second step sees a nonzero state produced by the first.
  EXPECT_LT(fd_max_rel_error(gru_leaves(7, true),
                             [](Tape&, const std::vector<Var>& v) {
                               const auto w = gru_weights(v);
                               return probe(diff::gru_cell(v[0], diff::gru_cell(v[0], v[1], w), w));
                             }),
            1e-6);
  EXPECT_LT(fd_max_rel_error(lstm_leaves(8, true),
                             [](Tape&, const std::vector<Var>& v) {
                               const auto w = lstm_weights(v);
                               return probe(diff::lstm_cell(v[0], diff::lstm_cell(v[0], v[1], w), w));
                             }),
            1e-6);
}

}  // namespace
}  // namespace tgcmc
