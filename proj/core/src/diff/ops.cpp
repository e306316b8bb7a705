#include "tgcmc/diff/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "tgcmc/error.hpp"

namespace tgcmc::diff {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

MatMap mat(Tensor& t) { return MatMap(t.data(), t.rows(), t.cols()); }
ConstMatMap mat(const Tensor& t) { return ConstMatMap(t.data(), t.rows(), t.cols()); }

Tensor like(const Tensor& t) { return Tensor(t.shape(), 0.0); }
Tensor matrix_of(std::size_t rows, std::size_t cols) { return Tensor::matrix(rows, cols); }

bool needs(Tape& tape, Var v) { return tape.requires_grad(v); }

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename F>
Var unary(const char* name, Var x, F&& f, Tape::Backprop backprop) {
  const Tensor& in = x.value();
  Tensor out = like(in);
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return x.tape().record(name, std::move(out), {x}, std::move(backprop));
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions disagree " + shape_string(av.shape()) + " x " +
                     shape_string(bv.shape()));
  }
  Tensor out = matrix_of(av.rows(), bv.cols());
  mat(out).noalias() = mat(av) * mat(bv);
  return a.tape().record("matmul", std::move(out), {a, b}, [a, b](Tape& tape, std::size_t self) {
    const auto g = mat(tape.grad(self));
    if (needs(tape, a)) mat(tape.grad(a)).noalias() += g * mat(b.value()).transpose();
    if (needs(tape, b)) mat(tape.grad(b)).noalias() += mat(a.value()).transpose() * g;
  });
}

Var add(Var a, Var b) {
  require_same_shape("add", a.value(), b.value());
  Tensor out = a.value();
  mat(out) += mat(b.value());
  return a.tape().record("add", std::move(out), {a, b}, [a, b](Tape& tape, std::size_t self) {
    const auto g = mat(tape.grad(self));
    if (needs(tape, a)) mat(tape.grad(a)) += g;
    if (needs(tape, b)) mat(tape.grad(b)) += g;
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a.value(), b.value());
  Tensor out = a.value();
  mat(out) -= mat(b.value());
  return a.tape().record("sub", std::move(out), {a, b}, [a, b](Tape& tape, std::size_t self) {
    const auto g = mat(tape.grad(self));
    if (needs(tape, a)) mat(tape.grad(a)) += g;
    if (needs(tape, b)) mat(tape.grad(b)) -= g;
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a.value(), b.value());
  Tensor out = a.value();
  mat(out).array() *= mat(b.value()).array();
  return a.tape().record("mul", std::move(out), {a, b}, [a, b](Tape& tape, std::size_t self) {
    const auto g = mat(tape.grad(self));
    if (needs(tape, a)) mat(tape.grad(a)).array() += g.array() * mat(b.value()).array();
    if (needs(tape, b)) mat(tape.grad(b)).array() += g.array() * mat(a.value()).array();
  });
}

Var add_row(Var a, Var bias) {
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != av.cols()) {
    throw ShapeError("add_row: bias " + shape_string(bv.shape()) + " does not match " +
                     shape_string(av.shape()));
  }
  Tensor out = av;
  mat(out).rowwise() += mat(bv).row(0);
  return a.tape().record("add_row", std::move(out), {a, bias},
                         [a, bias](Tape& tape, std::size_t self) {
                           const auto g = mat(tape.grad(self));
                           if (needs(tape, a)) mat(tape.grad(a)) += g;
                           if (needs(tape, bias)) mat(tape.grad(bias)) += g.colwise().sum();
                         });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  mat(out) *= factor;
  return a.tape().record("scale", std::move(out), {a}, [a, factor](Tape& tape, std::size_t self) {
    mat(tape.grad(a)) += factor * mat(tape.grad(self));
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (const double v : a.value().values()) total += v;
  return a.tape().record("sum", Tensor::scalar(total), {a}, [a](Tape& tape, std::size_t self) {
    const double g = tape.grad(self)[0];
    mat(tape.grad(a)).array() += g;
  });
}

Var relu(Var x) {
  double margin = std::numeric_limits<double>::infinity();
  for (const double v : x.value().values()) {
    if (v != 0.0) margin = std::min(margin, std::abs(v));
  }
  x.tape().note_relu_margin(margin);
  return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
               [x](Tape& tape, std::size_t self) {
                 const Tensor& g = tape.grad(self);
                 const Tensor& in = x.value();
                 Tensor& gx = tape.grad(x);
                 for (std::size_t i = 0; i < in.size(); ++i) {
                   if (in[i] > 0.0) gx[i] += g[i];
                 }
               });
}

Var sigmoid(Var x) {
  return unary("sigmoid", x, stable_sigmoid, [x](Tape& tape, std::size_t self) {
    const Tensor& g = tape.grad(self);
    const Tensor& y = tape.value(self);
    Tensor& gx = tape.grad(x);
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh(Var x) {
  return unary("tanh", x, [](double v) { return std::tanh(v); },
               [x](Tape& tape, std::size_t self) {
                 const Tensor& g = tape.grad(self);
                 const Tensor& y = tape.value(self);
                 Tensor& gx = tape.grad(x);
                 for (std::size_t i = 0; i < y.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
               });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = parts.front().value().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.value().rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += p.value().cols();
  }
  Tensor out = matrix_of(rows, cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.value().cols();
    mat(out).middleCols(offset, c) = mat(p.value());
    offset += c;
  }
  return parts.front().tape().record("concat_cols", std::move(out), parts,
                                     [parts](Tape& tape, std::size_t self) {
                                       const auto g = mat(tape.grad(self));
                                       std::size_t off = 0;
                                       for (const auto& p : parts) {
                                         const std::size_t c = p.value().cols();
                                         if (needs(tape, p)) mat(tape.grad(p)) += g.middleCols(off, c);
                                         off += c;
                                       }
                                     });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  if (begin > end || end > av.cols()) throw ShapeError("slice_cols: range out of bounds");
  Tensor out = matrix_of(av.rows(), end - begin);
  mat(out) = mat(av).middleCols(begin, end - begin);
  return a.tape().record("slice_cols", std::move(out), {a},
                         [a, begin, end](Tape& tape, std::size_t self) {
                           mat(tape.grad(a)).middleCols(begin, end - begin) += mat(tape.grad(self));
                         });
}

Var gather_accumulate(Var features, std::shared_ptr<const SparseRows> rows) {
  const Tensor& f = features.value();
  const std::size_t d = f.cols();
  const SparseRows& sr = *rows;
  if (sr.offsets.empty() || sr.offsets.back() != sr.indices.size() ||
      sr.indices.size() != sr.weights.size()) {
    throw ShapeError("gather_accumulate: malformed sparse rows");
  }
  for (const auto j : sr.indices) {
    if (j >= f.rows()) {
      throw ShapeError("gather_accumulate: neighbor index " + std::to_string(j) +
                       " out of range for " + std::to_string(f.rows()) + " rows");
    }
  }
  Tensor out = matrix_of(sr.rows(), d);
  for (std::size_t i = 0; i < sr.rows(); ++i) {
    double* dst = out.data() + i * d;
    for (std::size_t k = sr.offsets[i]; k < sr.offsets[i + 1]; ++k) {
      const double w = sr.weights[k];
      const double* src = f.data() + std::size_t{sr.indices[k]} * d;
      for (std::size_t c = 0; c < d; ++c) dst[c] += w * src[c];
    }
  }
  return features.tape().record(
      "gather_accumulate", std::move(out), {features},
      [features, rows](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        Tensor& gf = tape.grad(features);
        const std::size_t d = g.cols();
        for (std::size_t i = 0; i < rows->rows(); ++i) {
          const double* src = g.data() + i * d;
          for (std::size_t k = rows->offsets[i]; k < rows->offsets[i + 1]; ++k) {
            const double w = rows->weights[k];
            double* dst = gf.data() + std::size_t{rows->indices[k]} * d;
            for (std::size_t c = 0; c < d; ++c) dst[c] += w * src[c];
          }
        }
      });
}

Var gather_dot(Var a, Var b, std::shared_ptr<const std::vector<std::uint32_t>> rows_a,
               std::shared_ptr<const std::vector<std::uint32_t>> rows_b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) throw ShapeError("gather_dot: column counts differ");
  if (rows_a->size() != rows_b->size()) throw ShapeError("gather_dot: index lists differ in length");
  const std::size_t n = rows_a->size();
  Tensor out = matrix_of(n, 1);
  for (std::size_t e = 0; e < n; ++e) {
    const auto ia = (*rows_a)[e];
    const auto ib = (*rows_b)[e];
    if (ia >= av.rows() || ib >= bv.rows()) throw ShapeError("gather_dot: row index out of range");
    out[e] = mat(av).row(ia).dot(mat(bv).row(ib));
  }
  return a.tape().record(
      "gather_dot", std::move(out), {a, b}, [a, b, rows_a, rows_b](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        const bool ga = needs(tape, a);
        const bool gb = needs(tape, b);
        const auto av = mat(a.value());
        const auto bv = mat(b.value());
        for (std::size_t e = 0; e < rows_a->size(); ++e) {
          const auto ia = (*rows_a)[e];
          const auto ib = (*rows_b)[e];
          if (ga) mat(tape.grad(a)).row(ia) += g[e] * bv.row(ib);
          if (gb) mat(tape.grad(b)).row(ib) += g[e] * av.row(ia);
        }
      });
}

std::vector<double> dropout_mask(std::size_t n, double p, RngStream& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw DomainError("dropout probability must lie in [0, 1)");
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(n);
  for (auto& m : mask) m = rng.uniform() < p ? 0.0 : keep_scale;
  return mask;
}

Var dropout(Var x, double p, bool training, RngStream& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw DomainError("dropout probability must lie in [0, 1)");
  if (!training || p == 0.0) return x;
  auto mask = std::make_shared<std::vector<double>>(dropout_mask(x.value().size(), p, rng));
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= (*mask)[i];
  return x.tape().record("dropout", std::move(out), {x}, [x, mask](Tape& tape, std::size_t self) {
    const Tensor& g = tape.grad(self);
    Tensor& gx = tape.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*mask)[i];
  });
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor probs = logits;
  auto p = mat(probs);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double mx = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - mx).exp();
    p.row(i) /= p.row(i).sum();
  }
  return probs;
}

Var softmax_cross_entropy(Var logits, std::span<const std::uint32_t> targets) {
  const Tensor& z = logits.value();
  if (!z.all_finite()) throw NumericError("softmax_cross_entropy: non-finite logits");
  if (targets.size() != z.rows()) throw ShapeError("softmax_cross_entropy: one target per row required");
  if (z.rows() == 0) throw ShapeError("softmax_cross_entropy: no rows");
  const std::size_t k = z.cols();
  Tensor probs = softmax_rows(z);
  double total = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    if (targets[i] >= k) throw DomainError("softmax_cross_entropy: target out of range");
    const double* row = z.data() + i * k;
    const double mx = *std::max_element(row, row + k);
    double denom = 0.0;
    for (std::size_t c = 0; c < k; ++c) denom += std::exp(row[c] - mx);
    total += -(row[targets[i]] - mx - std::log(denom));
  }
  const double n = static_cast<double>(z.rows());
  auto owned_targets = std::make_shared<std::vector<std::uint32_t>>(targets.begin(), targets.end());
  return logits.tape().record(
      "softmax_cross_entropy", Tensor::scalar(total / n), {logits},
      [logits, owned_targets, n](Tape& tape, std::size_t self) {
        const double g = tape.grad(self)[0] / n;
        const Tensor& p = tape.aux(self);
        Tensor& gz = tape.grad(logits);
        const std::size_t k = p.cols();
        for (std::size_t i = 0; i < p.rows(); ++i) {
          for (std::size_t c = 0; c < k; ++c) {
            const double onehot = (*owned_targets)[i] == c ? 1.0 : 0.0;
            gz[i * k + c] += g * (p[i * k + c] - onehot);
          }
        }
      },
      std::move(probs));
}

const Tensor& cached_probabilities(Var loss) { return loss.tape().aux(loss); }

namespace {

// a := x W + h U + b
RowMatrix gate_preactivation(const Tensor& x, const Tensor& h_block, Var w, Var u, Var b,
                             Eigen::Index h_cols, Eigen::Index h_offset, bool zero_state) {
  RowMatrix a = mat(x) * mat(w.value());
  if (!zero_state) a.noalias() += mat(h_block).middleCols(h_offset, h_cols) * mat(u.value());
  a.rowwise() += mat(b.value()).row(0);
  return a;
}

// 1 / (1 + e^-a), vectorized; saturates to exactly 0 or 1 without NaN.
RowMatrix sigmoid_of(const RowMatrix& a) { return (1.0 + (-a.array()).exp()).inverse().matrix(); }

void check_cell_shapes(const char* op, const Tensor& x, std::size_t h_rows, std::size_t hidden,
                       std::initializer_list<Var> ws, std::initializer_list<Var> us,
                       std::initializer_list<Var> bs) {
  if (x.rows() != h_rows) throw ShapeError(std::string(op) + ": batch sizes differ");
  for (const auto& w : ws) {
    if (w.value().rows() != x.cols() || w.value().cols() != hidden) {
      throw ShapeError(std::string(op) + ": input weight shape " + shape_string(w.value().shape()));
    }
  }
  for (const auto& u : us) {
    if (u.value().rows() != hidden || u.value().cols() != hidden) {
      throw ShapeError(std::string(op) + ": recurrent weight shape " + shape_string(u.value().shape()));
    }
  }
  for (const auto& b : bs) {
    if (b.value().rows() != 1 || b.value().cols() != hidden) {
      throw ShapeError(std::string(op) + ": bias shape " + shape_string(b.value().shape()));
    }
  }
}

// Accumulates the parameter and input gradients of one gate given d(preactivation).
// With a zero incoming state the U gradient vanishes and is skipped; dh is
// only formed when the state needs a gradient.
void gate_backward(Tape& tape, const RowMatrix& da, const Tensor& x, const RowMatrix& h_in, Var xv,
                   Var w, Var u, Var b, RowMatrix* dx, RowMatrix* dh, bool zero_state) {
  if (needs(tape, w)) mat(tape.grad(w)).noalias() += mat(x).transpose() * da;
  if (!zero_state && needs(tape, u)) mat(tape.grad(u)).noalias() += h_in.transpose() * da;
  if (needs(tape, b)) mat(tape.grad(b)) += da.colwise().sum();
  if (dx && needs(tape, xv)) dx->noalias() += da * mat(w.value()).transpose();
  if (dh) dh->noalias() += da * mat(u.value()).transpose();
}

}  // namespace

Var gru_cell(Var x, Var h, const GruWeights& w) {
  const Tensor& xv = x.value();
  const Tensor& hv = h.value();
  const auto hidden = static_cast<Eigen::Index>(hv.cols());
  check_cell_shapes("gru_cell", xv, hv.rows(), hv.cols(), {w.w_update, w.w_reset, w.w_candidate},
                    {w.u_update, w.u_reset, w.u_candidate}, {w.b_update, w.b_reset, w.b_candidate});

  // The initial state is usually all zeros; its recurrent products vanish.
  const bool zero_state = mat(hv).isZero(0.0);
  const RowMatrix z =
      sigmoid_of(gate_preactivation(xv, hv, w.w_update, w.u_update, w.b_update, hidden, 0, zero_state));
  const RowMatrix r =
      sigmoid_of(gate_preactivation(xv, hv, w.w_reset, w.u_reset, w.b_reset, hidden, 0, zero_state));
  const RowMatrix q = r.array() * mat(hv).array();
  RowMatrix n = mat(xv) * mat(w.w_candidate.value());
  if (!zero_state) n.noalias() += q * mat(w.u_candidate.value());
  n.rowwise() += mat(w.b_candidate.value()).row(0);
  n = n.array().tanh();

  Tensor out = like(hv);
  mat(out) = z.array() * mat(hv).array() + (1.0 - z.array()) * n.array();

  // aux = [z | r | n | q]
  Tensor aux = matrix_of(hv.rows(), 4 * hv.cols());
  mat(aux).middleCols(0, hidden) = z;
  mat(aux).middleCols(hidden, hidden) = r;
  mat(aux).middleCols(2 * hidden, hidden) = n;
  mat(aux).middleCols(3 * hidden, hidden) = q;

  const std::vector<Var> inputs{x, h, w.w_update, w.w_reset, w.w_candidate, w.u_update, w.u_reset,
                                w.u_candidate, w.b_update, w.b_reset, w.b_candidate};
  return x.tape().record(
      "gru_cell", std::move(out), inputs,
      [x, h, w, hidden, zero_state](Tape& tape, std::size_t self) {
        const auto g = mat(tape.grad(self));
        const auto aux = mat(tape.aux(self));
        const RowMatrix z = aux.middleCols(0, hidden);
        const RowMatrix r = aux.middleCols(hidden, hidden);
        const RowMatrix n = aux.middleCols(2 * hidden, hidden);
        const RowMatrix q = aux.middleCols(3 * hidden, hidden);
        const RowMatrix h_prev = mat(h.value());
        const Tensor& xv = x.value();

        const bool need_dh = needs(tape, h);
        RowMatrix dh = g.array() * z.array();
        RowMatrix dx = RowMatrix::Zero(xv.rows(), xv.cols());

        const RowMatrix dz = g.array() * (h_prev.array() - n.array());
        const RowMatrix da_n = (g.array() * (1.0 - z.array())) * (1.0 - n.array().square());
        // Candidate gate reads q = r * h through U_n; dq also feeds the reset gate.
        RowMatrix dq = RowMatrix::Zero(q.rows(), q.cols());
        const bool need_dq = need_dh || !zero_state;
        gate_backward(tape, da_n, xv, q, x, w.w_candidate, w.u_candidate, w.b_candidate, &dx,
                      need_dq ? &dq : nullptr, zero_state);
        dh.array() += dq.array() * r.array();
        const RowMatrix da_r = (dq.array() * h_prev.array()) * r.array() * (1.0 - r.array());
        RowMatrix* dh_slot = need_dh ? &dh : nullptr;
        gate_backward(tape, da_r, xv, h_prev, x, w.w_reset, w.u_reset, w.b_reset, &dx, dh_slot, zero_state);
        const RowMatrix da_z = dz.array() * z.array() * (1.0 - z.array());
        gate_backward(tape, da_z, xv, h_prev, x, w.w_update, w.u_update, w.b_update, &dx, dh_slot, zero_state);

        if (needs(tape, x)) mat(tape.grad(x)) += dx;
        if (need_dh) mat(tape.grad(h)) += dh;
      },
      std::move(aux));
}

Var lstm_cell(Var x, Var state, const LstmWeights& w) {
  const Tensor& xv = x.value();
  const Tensor& sv = state.value();
  if (sv.cols() % 2 != 0) throw ShapeError("lstm_cell: state must be [N x 2H]");
  const auto hidden = static_cast<Eigen::Index>(sv.cols() / 2);
  check_cell_shapes("lstm_cell", xv, sv.rows(), static_cast<std::size_t>(hidden),
                    {w.w_input, w.w_forget, w.w_output, w.w_cell},
                    {w.u_input, w.u_forget, w.u_output, w.u_cell},
                    {w.b_input, w.b_forget, w.b_output, w.b_cell});

  const bool zero_state = mat(sv).middleCols(0, hidden).isZero(0.0);
  const RowMatrix i =
      sigmoid_of(gate_preactivation(xv, sv, w.w_input, w.u_input, w.b_input, hidden, 0, zero_state));
  const RowMatrix f =
      sigmoid_of(gate_preactivation(xv, sv, w.w_forget, w.u_forget, w.b_forget, hidden, 0, zero_state));
  const RowMatrix o =
      sigmoid_of(gate_preactivation(xv, sv, w.w_output, w.u_output, w.b_output, hidden, 0, zero_state));
  const RowMatrix g =
      gate_preactivation(xv, sv, w.w_cell, w.u_cell, w.b_cell, hidden, 0, zero_state).array().tanh();
  const RowMatrix c_prev = mat(sv).middleCols(hidden, hidden);
  const RowMatrix c = f.array() * c_prev.array() + i.array() * g.array();
  const RowMatrix tc = c.array().tanh();

  Tensor out = like(sv);
  mat(out).middleCols(0, hidden) = o.array() * tc.array();
  mat(out).middleCols(hidden, hidden) = c;

  // aux = [i | f | o | g | tanh(c')]
  Tensor aux = matrix_of(sv.rows(), 5 * static_cast<std::size_t>(hidden));
  mat(aux).middleCols(0, hidden) = i;
  mat(aux).middleCols(hidden, hidden) = f;
  mat(aux).middleCols(2 * hidden, hidden) = o;
  mat(aux).middleCols(3 * hidden, hidden) = g;
  mat(aux).middleCols(4 * hidden, hidden) = tc;

  const std::vector<Var> inputs{x,           state,       w.w_input,  w.w_forget, w.w_output,
                                w.w_cell,    w.u_input,   w.u_forget, w.u_output, w.u_cell,
                                w.b_input,   w.b_forget,  w.b_output, w.b_cell};
  return x.tape().record(
      "lstm_cell", std::move(out), inputs,
      [x, state, w, hidden, zero_state](Tape& tape, std::size_t self) {
        const auto gs = mat(tape.grad(self));
        const auto aux = mat(tape.aux(self));
        const RowMatrix i = aux.middleCols(0, hidden);
        const RowMatrix f = aux.middleCols(hidden, hidden);
        const RowMatrix o = aux.middleCols(2 * hidden, hidden);
        const RowMatrix g = aux.middleCols(3 * hidden, hidden);
        const RowMatrix tc = aux.middleCols(4 * hidden, hidden);
        const RowMatrix h_prev = mat(state.value()).middleCols(0, hidden);
        const RowMatrix c_prev = mat(state.value()).middleCols(hidden, hidden);
        const Tensor& xv = x.value();

        const RowMatrix dh_out = gs.middleCols(0, hidden);
        const RowMatrix dc = gs.middleCols(hidden, hidden).array() +
                             dh_out.array() * o.array() * (1.0 - tc.array().square());
        const RowMatrix da_o = dh_out.array() * tc.array() * o.array() * (1.0 - o.array());
        const RowMatrix da_i = dc.array() * g.array() * i.array() * (1.0 - i.array());
        const RowMatrix da_f = dc.array() * c_prev.array() * f.array() * (1.0 - f.array());
        const RowMatrix da_g = dc.array() * i.array() * (1.0 - g.array().square());

        RowMatrix dx = RowMatrix::Zero(xv.rows(), xv.cols());
        const bool need_ds = needs(tape, state);
        RowMatrix dh = RowMatrix::Zero(h_prev.rows(), h_prev.cols());
        RowMatrix* dh_slot = need_ds ? &dh : nullptr;
        gate_backward(tape, da_i, xv, h_prev, x, w.w_input, w.u_input, w.b_input, &dx, dh_slot, zero_state);
        gate_backward(tape, da_f, xv, h_prev, x, w.w_forget, w.u_forget, w.b_forget, &dx, dh_slot, zero_state);
        gate_backward(tape, da_o, xv, h_prev, x, w.w_output, w.u_output, w.b_output, &dx, dh_slot, zero_state);
        gate_backward(tape, da_g, xv, h_prev, x, w.w_cell, w.u_cell, w.b_cell, &dx, dh_slot, zero_state);

        if (needs(tape, x)) mat(tape.grad(x)) += dx;
        if (need_ds) {
          auto ds = mat(tape.grad(state));
          ds.middleCols(0, hidden) += dh;
          ds.middleCols(hidden, hidden).array() += dc.array() * f.array();
        }
      },
      std::move(aux));
}

}  // namespace tgcmc::diff
