#ifndef TGCMC_MODEL_HPP_
#define TGCMC_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tgcmc/diff/ops.hpp"
#include "tgcmc/diff/tape.hpp"
#include "tgcmc/diff/tensor.hpp"
#include "tgcmc/rng.hpp"
#include "tgcmc/temporal_graph.hpp"

namespace tgcmc {

using diff::Tensor;
using diff::Var;

enum class Accumulation { kConcat, kSum };
enum class RecurrentKind { kNone, kGru, kLstm };

Accumulation parse_accumulation(std::string_view name);
std::string_view to_string(Accumulation accum);
RecurrentKind parse_recurrent_kind(std::string_view name);
std::string_view to_string(RecurrentKind kind);

struct ModelConfig {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::vector<int> rating_levels{1, 2, 3, 4, 5};
  std::size_t d_hidden = 500;
  std::size_t d_output = 75;
  Accumulation accum = Accumulation::kConcat;
  double dropout = 0.7;
  NormScheme norm = NormScheme::kLeft;
  RecurrentKind recurrent = RecurrentKind::kNone;
  std::size_t recurrent_hidden = 500;
  std::size_t steps = 1;
  bool ordinal_sharing = true;
  std::size_t basis_count = 2;

  // One-hot width: every user and item is an input feature.
  std::size_t d_input() const { return n_users + n_items; }
  std::size_t n_levels() const { return rating_levels.size(); }
  // Output width of each W_r.
  std::size_t level_width() const {
    return accum == Accumulation::kConcat ? d_hidden / n_levels() : d_hidden;
  }
  // Width of the encodings the decoder sees.
  std::size_t z_dim() const {
    return recurrent == RecurrentKind::kNone ? d_output : recurrent_hidden;
  }

  // Throws ConfigError on a violated invariant.
  void validate() const;
};

nlohmann::ordered_json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Named parameter tensors in a fixed registration order.
//
// Layout (all row-major):
//   encoder.basis.<r>  [d_input x level_width]   row j is T_r x_j
//   encoder.dense      [d_hidden x d_output]     transpose of W
//   decoder.basis.<s>  [z_dim x z_dim]           P_s
//   decoder.coeff      [basis_count x |R|]       a_{rs} at (s, r)
//   gru.{w,u,b}_{update,reset,candidate}, lstm.{w,u,b}_{input,forget,output,cell}
//     w: [d_output x H], u: [H x H], b: [1 x H]
class ModelParameters {
 public:
  using Entry = std::pair<std::string, Tensor>;

  void add(std::string name, Tensor value);
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  friend bool operator==(const ModelParameters&, const ModelParameters&) = default;

 private:
  std::vector<Entry> entries_;
};

// Glorot-uniform weights, zero biases. Deterministic in `seed`.
ModelParameters init_parameters(const ModelConfig& config, std::uint64_t seed);

// W_r (transposed, [d_input x level_width]); with ordinal sharing, the sum of
// bases 0..r.
Tensor encoder_weight(const ModelParameters& params, const ModelConfig& config, std::size_t level);
// Q_r = sum_s a_{rs} P_s.
Tensor decoder_weight(const ModelParameters& params, const ModelConfig& config, std::size_t level);

// Message-passing structure for one graph step over the encoder's row space.
// Neighbor indices are global node ids (users first, then items); weights
// hold 1/c_ij.
struct StepGraph {
  std::vector<std::shared_ptr<const diff::SparseRows>> levels;
};

// Encoder input for a whole sequence. Nodes that have no edge in any step
// produce identical encodings, so they share one trailing "null" row.
struct EncoderGraph {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::vector<std::uint32_t> row_of_node;  // global node id -> row
  std::size_t n_rows = 0;
  std::vector<StepGraph> steps;

  std::uint32_t user_row(std::uint32_t user) const { return row_of_node[user]; }
  std::uint32_t item_row(std::uint32_t item) const { return row_of_node[n_users + item]; }
};

// With `compact` off every node gets its own row (used to check compaction).
EncoderGraph prepare_encoder_graph(std::span<const AdjacencyStructure> steps, bool compact = true);
EncoderGraph prepare_encoder_graph(const MatrixSequence& seq, const ModelConfig& config,
                                   bool compact = true);

// Parameters bound as leaves on a tape, plus the derived encoder weights.
class BoundModel {
 public:
  BoundModel(diff::Tape& tape, const ModelParameters& params, const ModelConfig& config);

  diff::Tape& tape() const { return *tape_; }
  const ModelConfig& config() const { return *config_; }
  Var param(std::string_view name) const;
  // W_r per level, materialized once per tape.
  const std::vector<Var>& encoder_weights() const { return encoder_weights_; }
  diff::GruWeights gru_weights() const;
  diff::LstmWeights lstm_weights() const;

 private:
  diff::Tape* tape_;
  const ModelConfig* config_;
  std::vector<std::pair<std::string, Var>> vars_;
  std::vector<Var> encoder_weights_;
};

// One GCMC encoder pass over a step: returns [n_rows x d_output].
// Dropout (training only): one draw per input node on the one-hot features,
// and elementwise on the output encodings.
Var encode_step(const BoundModel& model, const StepGraph& step, std::size_t n_rows, bool training,
                SeedSequence& seeds);

struct SequenceEncoding {
  Var z;                     // [n_rows x z_dim]
  std::vector<Var> per_step;  // z^(t), [n_rows x d_output]
};

// Shared encoder over every step, then the recurrent cell (zero initial
// state); the final hidden state is the encoding. Without a cell the single
// step's encoding is returned.
SequenceEncoding encode_sequence(const BoundModel& model, const EncoderGraph& graph, bool training,
                                 SeedSequence& seeds);

// Bilinear decoder scores z_u^T Q_r z_v for each edge: [E x |R|].
Var edge_logits(const BoundModel& model, Var z, const EncoderGraph& graph,
                std::span<const Edge> edges);

// Encodings expanded back to users and items.
struct NodeEncodings {
  Tensor users;  // [n_users x z_dim]
  Tensor items;  // [n_items x z_dim]
  std::vector<Tensor> step_users;  // z^(t) for users, empty without a cell
  std::vector<Tensor> step_items;
};

NodeEncodings encode(const ModelParameters& params, const ModelConfig& config,
                     const EncoderGraph& graph, bool training, std::uint64_t seed);

// Single-graph convenience: encodes one adjacency with the shared encoder.
NodeEncodings encode_adjacency(const ModelParameters& params, const ModelConfig& config,
                               const AdjacencyStructure& adj, bool training, std::uint64_t seed);

// One recurrent step over a batch of rows using the named cell parameters.
Tensor gru_step(const ModelParameters& params, const Tensor& x, const Tensor& h_prev);
std::pair<Tensor, Tensor> lstm_step(const ModelParameters& params, const Tensor& x,
                                    const Tensor& h_prev, const Tensor& c_prev);

// Softmax over the |R| bilinear scores of one (user, item) pair.
std::vector<double> decode(std::span<const double> z_user, std::span<const double> z_item,
                           const ModelParameters& params, const ModelConfig& config);

// Sum over edges of -log P(target) (the training objective up to the 1/E
// factor used by the optimizer).
double negative_log_likelihood(std::span<const std::vector<double>> probabilities,
                               std::span<const std::uint32_t> targets);

// Expected rating sum_r r P(r). Throws DomainError if `probabilities` is not
// normalized within 1e-9.
double predict_rating(std::span<const double> probabilities, std::span<const int> levels);

// Expected ratings for `edges` from the model in eval mode (no dropout).
std::vector<double> predict_edges(const ModelParameters& params, const ModelConfig& config,
                                  const EncoderGraph& graph, std::span<const Edge> edges);

}  // namespace tgcmc

#endif  // TGCMC_MODEL_HPP_
