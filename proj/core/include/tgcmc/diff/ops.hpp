#ifndef TGCMC_DIFF_OPS_HPP_
#define TGCMC_DIFF_OPS_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "tgcmc/diff/tape.hpp"
#include "tgcmc/rng.hpp"

namespace tgcmc::diff {

// Differentiable ops. Each records onto the tape owning its inputs and
// throws NumericError if the result is not finite.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
// Elementwise product.
Var mul(Var a, Var b);
// a [m x n] + bias [1 x n] on every row.
Var add_row(Var a, Var bias);
Var scale(Var a, double factor);
// Sum of all entries, 1x1.
Var sum(Var a);

Var relu(Var x);
Var sigmoid(Var x);
Var tanh(Var x);

Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);

// Weighted CSR rows: row i reads entries [offsets[i], offsets[i+1]).
struct SparseRows {
  std::vector<std::size_t> offsets;
  std::vector<std::uint32_t> indices;
  std::vector<double> weights;

  std::size_t rows() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

// out[i] = sum_k weights[k] * features[indices[k]] over row i's entries.
Var gather_accumulate(Var features, std::shared_ptr<const SparseRows> rows);

// out[e] = <a[rows_a[e]], b[rows_b[e]]>, shape [E x 1].
Var gather_dot(Var a, Var b, std::shared_ptr<const std::vector<std::uint32_t>> rows_a,
               std::shared_ptr<const std::vector<std::uint32_t>> rows_b);

// Inverted dropout with drop probability p. Identity (same Var) when not
// training or when p == 0.
Var dropout(Var x, double p, bool training, RngStream& rng);

// Per-element keep/drop scales (0 or 1/(1-p)) for n units.
std::vector<double> dropout_mask(std::size_t n, double p, RngStream& rng);

// Mean over rows of -log softmax(logits)[target]. The row-stochastic
// probabilities are cached on the result node (see cached_probabilities).
Var softmax_cross_entropy(Var logits, std::span<const std::uint32_t> targets);
const Tensor& cached_probabilities(Var loss);

// Row-wise softmax without recording (max-subtracted).
Tensor softmax_rows(const Tensor& logits);

// Gated recurrent unit over a batch of rows:
//   z = sigmoid(x Wz + h Uz + bz), r = sigmoid(x Wr + h Ur + br)
//   n = tanh(x Wn + (r * h) Un + bn), h' = z * h + (1 - z) * n
struct GruWeights {
  Var w_update, w_reset, w_candidate;  // [in x H]
  Var u_update, u_reset, u_candidate;  // [H x H]
  Var b_update, b_reset, b_candidate;  // [1 x H]
};
Var gru_cell(Var x, Var h, const GruWeights& w);

// LSTM over a batch of rows. The state is [h | c], shape [N x 2H]:
//   i, f, o = sigmoid(x W + h U + b), g = tanh(x Wg + h Ug + bg)
//   c' = f * c + i * g, h' = o * tanh(c')
struct LstmWeights {
  Var w_input, w_forget, w_output, w_cell;
  Var u_input, u_forget, u_output, u_cell;
  Var b_input, b_forget, b_output, b_cell;
};
Var lstm_cell(Var x, Var state, const LstmWeights& w);

}  // namespace tgcmc::diff

#endif  // TGCMC_DIFF_OPS_HPP_
