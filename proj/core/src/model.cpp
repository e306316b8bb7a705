#include "tgcmc/model.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "tgcmc/error.hpp"

namespace tgcmc {

using diff::SparseRows;
using diff::Tape;

Accumulation parse_accumulation(std::string_view name) {
  if (name == "concat") return Accumulation::kConcat;
  if (name == "sum") return Accumulation::kSum;
  throw ConfigError("unknown accumulation '" + std::string(name) + "' (expected concat or sum)");
}

std::string_view to_string(Accumulation accum) {
  return accum == Accumulation::kConcat ? "concat" : "sum";
}

RecurrentKind parse_recurrent_kind(std::string_view name) {
  if (name == "none") return RecurrentKind::kNone;
  if (name == "gru") return RecurrentKind::kGru;
  if (name == "lstm") return RecurrentKind::kLstm;
  throw ConfigError("unknown recurrent cell '" + std::string(name) + "' (expected none, gru or lstm)");
}

std::string_view to_string(RecurrentKind kind) {
  switch (kind) {
    case RecurrentKind::kNone:
      return "none";
    case RecurrentKind::kGru:
      return "gru";
    case RecurrentKind::kLstm:
      return "lstm";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (n_users == 0 || n_items == 0) throw ConfigError("model needs at least one user and one item");
  if (rating_levels.empty()) throw ConfigError("model needs at least one rating level");
  if (!std::is_sorted(rating_levels.begin(), rating_levels.end()) ||
      std::adjacent_find(rating_levels.begin(), rating_levels.end()) != rating_levels.end()) {
    throw ConfigError("rating levels must be strictly increasing");
  }
  if (d_hidden == 0 || d_output == 0) throw ConfigError("d_hidden and d_output must be positive");
  if (accum == Accumulation::kConcat && d_hidden % n_levels() != 0) {
    throw ConfigError("concat accumulation needs d_hidden (" + std::to_string(d_hidden) +
                      ") divisible by the number of rating levels (" +
                      std::to_string(n_levels()) + ")");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (steps == 0) throw ConfigError("step count T must be positive");
  if (recurrent == RecurrentKind::kNone && steps != 1) {
    throw ConfigError("a model without a recurrent cell needs T = 1");
  }
  if (recurrent != RecurrentKind::kNone && recurrent_hidden == 0) {
    throw ConfigError("recurrent_hidden must be positive");
  }
  if (basis_count == 0) throw ConfigError("basis_count must be positive");
}

nlohmann::ordered_json to_json(const ModelConfig& c) {
  return nlohmann::ordered_json{
      {"n_users", c.n_users},
      {"n_items", c.n_items},
      {"rating_levels", c.rating_levels},
      {"d_hidden", c.d_hidden},
      {"d_output", c.d_output},
      {"accum", std::string(to_string(c.accum))},
      {"dropout", c.dropout},
      {"norm", std::string(to_string(c.norm))},
      {"recurrent", std::string(to_string(c.recurrent))},
      {"recurrent_hidden", c.recurrent_hidden},
      {"steps", c.steps},
      {"ordinal_sharing", c.ordinal_sharing},
      {"basis_count", c.basis_count},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.n_users = j.at("n_users").get<std::size_t>();
    c.n_items = j.at("n_items").get<std::size_t>();
    c.rating_levels = j.at("rating_levels").get<std::vector<int>>();
    c.d_hidden = j.at("d_hidden").get<std::size_t>();
    c.d_output = j.at("d_output").get<std::size_t>();
    c.accum = parse_accumulation(j.at("accum").get<std::string>());
    c.dropout = j.at("dropout").get<double>();
    c.norm = parse_norm_scheme(j.at("norm").get<std::string>());
    c.recurrent = parse_recurrent_kind(j.at("recurrent").get<std::string>());
    c.recurrent_hidden = j.at("recurrent_hidden").get<std::size_t>();
    c.steps = j.at("steps").get<std::size_t>();
    c.ordinal_sharing = j.at("ordinal_sharing").get<bool>();
    c.basis_count = j.at("basis_count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid model config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Parameters

void ModelParameters::add(std::string name, Tensor value) {
  if (contains(name)) throw Error("duplicate parameter '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(value));
}

Tensor& ModelParameters::at(std::string_view name) {
  for (auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw Error("no parameter named '" + std::string(name) + "'");
}

const Tensor& ModelParameters::at(std::string_view name) const {
  return const_cast<ModelParameters*>(this)->at(name);
}

bool ModelParameters::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.first == name; });
}

std::size_t ModelParameters::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

namespace {

constexpr const char* kGruGates[] = {"update", "reset", "candidate"};
constexpr const char* kLstmGates[] = {"input", "forget", "output", "cell"};

Tensor glorot(std::size_t fan_in, std::size_t fan_out, RngStream rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = Tensor::matrix(fan_in, fan_out);
  for (auto& v : t.values()) v = rng.uniform(-a, a);
  return t;
}

void add_cell(ModelParameters& params, const char* prefix, std::span<const char* const> gates,
              std::size_t in, std::size_t hidden, const SeedSequence& seeds, std::uint64_t& stream) {
  const std::string p(prefix);
  for (const auto* g : gates) params.add(p + ".w_" + g, glorot(in, hidden, RngStream(seeds.derive(stream++))));
  for (const auto* g : gates) {
    params.add(p + ".u_" + g, glorot(hidden, hidden, RngStream(seeds.derive(stream++))));
  }
  for (const auto* g : gates) params.add(p + ".b_" + g, Tensor::matrix(1, hidden));
}

}  // namespace

ModelParameters init_parameters(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  const SeedSequence seeds(seed);
  std::uint64_t stream = 0;
  const auto next = [&] { return RngStream(seeds.derive(stream++)); };

  ModelParameters params;
  for (std::size_t r = 0; r < config.n_levels(); ++r) {
    params.add("encoder.basis." + std::to_string(r),
               glorot(config.d_input(), config.level_width(), next()));
  }
  params.add("encoder.dense", glorot(config.d_hidden, config.d_output, next()));
  for (std::size_t s = 0; s < config.basis_count; ++s) {
    params.add("decoder.basis." + std::to_string(s), glorot(config.z_dim(), config.z_dim(), next()));
  }
  params.add("decoder.coeff", glorot(config.basis_count, config.n_levels(), next()));
  if (config.recurrent == RecurrentKind::kGru) {
    add_cell(params, "gru", kGruGates, config.d_output, config.recurrent_hidden, seeds, stream);
  } else if (config.recurrent == RecurrentKind::kLstm) {
    add_cell(params, "lstm", kLstmGates, config.d_output, config.recurrent_hidden, seeds, stream);
  }
  return params;
}

Tensor encoder_weight(const ModelParameters& params, const ModelConfig& config, std::size_t level) {
  if (level >= config.n_levels()) throw DomainError("rating level out of range");
  if (!config.ordinal_sharing) return params.at("encoder.basis." + std::to_string(level));
  Tensor w = params.at("encoder.basis.0");
  for (std::size_t s = 1; s <= level; ++s) {
    const Tensor& b = params.at("encoder.basis." + std::to_string(s));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += b[i];
  }
  return w;
}

Tensor decoder_weight(const ModelParameters& params, const ModelConfig& config, std::size_t level) {
  if (level >= config.n_levels()) throw DomainError("rating level out of range");
  const Tensor& coeff = params.at("decoder.coeff");
  Tensor q = Tensor::matrix(config.z_dim(), config.z_dim());
  for (std::size_t s = 0; s < config.basis_count; ++s) {
    const Tensor& p = params.at("decoder.basis." + std::to_string(s));
    const double a = coeff(s, level);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += a * p[i];
  }
  return q;
}

// ---------------------------------------------------------------------------
// Encoder graph

EncoderGraph prepare_encoder_graph(std::span<const AdjacencyStructure> steps, bool compact) {
  if (steps.empty()) throw DomainError("encoder graph needs at least one step");
  EncoderGraph g;
  g.n_users = steps.front().n_users;
  g.n_items = steps.front().n_items;
  const std::size_t n_nodes = g.n_users + g.n_items;
  const std::size_t n_levels = steps.front().n_levels;
  for (const auto& adj : steps) {
    if (adj.n_users != g.n_users || adj.n_items != g.n_items || adj.n_levels != n_levels) {
      throw DomainError("all steps must share one node universe");
    }
  }

  std::vector<bool> active(n_nodes, !compact);
  for (const auto& adj : steps) {
    for (std::size_t u = 0; u < g.n_users; ++u) active[u] = active[u] || adj.user_degree[u] > 0;
    for (std::size_t v = 0; v < g.n_items; ++v) {
      active[g.n_users + v] = active[g.n_users + v] || adj.item_degree[v] > 0;
    }
  }
  std::vector<std::size_t> node_of_row;
  for (std::size_t n = 0; n < n_nodes; ++n) {
    if (active[n]) node_of_row.push_back(n);
  }
  const auto null_row = static_cast<std::uint32_t>(node_of_row.size());
  g.row_of_node.assign(n_nodes, null_row);
  for (std::size_t row = 0; row < node_of_row.size(); ++row) {
    g.row_of_node[node_of_row[row]] = static_cast<std::uint32_t>(row);
  }
  g.n_rows = node_of_row.size() + (compact ? 1 : 0);

  for (const auto& adj : steps) {
    StepGraph step;
    for (std::size_t r = 0; r < n_levels; ++r) {
      auto rows = std::make_shared<SparseRows>();
      rows->offsets.reserve(g.n_rows + 1);
      rows->offsets.push_back(0);
      for (std::size_t row = 0; row < g.n_rows; ++row) {
        if (row < node_of_row.size()) {
          const std::size_t node = node_of_row[row];
          const bool is_user = node < g.n_users;
          const auto& lists = is_user ? adj.user_neighbors[r] : adj.item_neighbors[r];
          const std::size_t local = is_user ? node : node - g.n_users;
          const auto nbrs = lists.neighbors_of(local);
          const auto norms = lists.norm_of(local);
          for (std::size_t k = 0; k < nbrs.size(); ++k) {
            // A user's neighbors are items and vice versa.
            rows->indices.push_back(
                static_cast<std::uint32_t>(is_user ? g.n_users + nbrs[k] : nbrs[k]));
            rows->weights.push_back(1.0 / norms[k]);
          }
        }
        rows->offsets.push_back(rows->indices.size());
      }
      step.levels.push_back(std::move(rows));
    }
    g.steps.push_back(std::move(step));
  }
  return g;
}

EncoderGraph prepare_encoder_graph(const MatrixSequence& seq, const ModelConfig& config, bool compact) {
  std::vector<AdjacencyStructure> adjs;
  adjs.reserve(seq.length());
  for (const auto& step : seq.steps) {
    adjs.push_back(build_adjacency(step, config.n_users, config.n_items, config.n_levels(), config.norm));
  }
  return prepare_encoder_graph(adjs, compact);
}

// ---------------------------------------------------------------------------
// Forward pass

BoundModel::BoundModel(Tape& tape, const ModelParameters& params, const ModelConfig& config)
    : tape_(&tape), config_(&config) {
  for (const auto& [name, value] : params) vars_.emplace_back(name, tape.parameter(name, value));
  for (std::size_t r = 0; r < config.n_levels(); ++r) {
    const Var basis = param("encoder.basis." + std::to_string(r));
    if (config.ordinal_sharing && r > 0) {
      encoder_weights_.push_back(diff::add(encoder_weights_.back(), basis));
    } else {
      encoder_weights_.push_back(basis);
    }
  }
}

Var BoundModel::param(std::string_view name) const {
  for (const auto& [n, v] : vars_) {
    if (n == name) return v;
  }
  throw Error("model has no parameter '" + std::string(name) + "'");
}

diff::GruWeights BoundModel::gru_weights() const {
  return {param("gru.w_update"), param("gru.w_reset"), param("gru.w_candidate"),
          param("gru.u_update"), param("gru.u_reset"), param("gru.u_candidate"),
          param("gru.b_update"), param("gru.b_reset"), param("gru.b_candidate")};
}

diff::LstmWeights BoundModel::lstm_weights() const {
  return {param("lstm.w_input"),  param("lstm.w_forget"), param("lstm.w_output"),
          param("lstm.w_cell"),   param("lstm.u_input"),  param("lstm.u_forget"),
          param("lstm.u_output"), param("lstm.u_cell"),   param("lstm.b_input"),
          param("lstm.b_forget"), param("lstm.b_output"), param("lstm.b_cell")};
}

Var encode_step(const BoundModel& model, const StepGraph& step, std::size_t n_rows, bool training,
                SeedSequence& seeds) {
  const ModelConfig& config = model.config();
  if (step.levels.size() != config.n_levels()) {
    throw ShapeError("step graph has " + std::to_string(step.levels.size()) +
                     " rating levels, model expects " + std::to_string(config.n_levels()));
  }
  RngStream input_rng = seeds.next_stream();
  RngStream output_rng = seeds.next_stream();
  const bool drop = training && config.dropout > 0.0;
  std::vector<double> input_mask;
  if (drop) input_mask = diff::dropout_mask(config.d_input(), config.dropout, input_rng);

  std::vector<Var> messages;
  messages.reserve(config.n_levels());
  for (std::size_t r = 0; r < config.n_levels(); ++r) {
    const auto& rows = step.levels[r];
    if (rows->rows() != n_rows) throw ShapeError("step graph row count disagrees with encoder");
    if (drop) {
      // Dropping the one-hot feature of node j removes its message everywhere.
      auto masked = std::make_shared<SparseRows>(*rows);
      for (std::size_t k = 0; k < masked->indices.size(); ++k) {
        masked->weights[k] *= input_mask[masked->indices[k]];
      }
      messages.push_back(diff::gather_accumulate(model.encoder_weights()[r], std::move(masked)));
    } else {
      messages.push_back(diff::gather_accumulate(model.encoder_weights()[r], rows));
    }
  }

  Var hidden;
  if (config.accum == Accumulation::kConcat) {
    hidden = diff::concat_cols(messages);
  } else {
    hidden = messages.front();
    for (std::size_t r = 1; r < messages.size(); ++r) hidden = diff::add(hidden, messages[r]);
  }
  hidden = diff::relu(hidden);
  Var z = diff::relu(diff::matmul(hidden, model.param("encoder.dense")));
  return diff::dropout(z, config.dropout, training, output_rng);
}

SequenceEncoding encode_sequence(const BoundModel& model, const EncoderGraph& graph, bool training,
                                 SeedSequence& seeds) {
  const ModelConfig& config = model.config();
  if (graph.steps.size() != config.steps) {
    throw ShapeError("sequence has " + std::to_string(graph.steps.size()) +
                     " steps, model expects T = " + std::to_string(config.steps));
  }
  SequenceEncoding out;
  for (const auto& step : graph.steps) {
    out.per_step.push_back(encode_step(model, step, graph.n_rows, training, seeds));
  }
  diff::Tape& tape = model.tape();
  const std::size_t hidden = config.recurrent_hidden;
  switch (config.recurrent) {
    case RecurrentKind::kNone:
      out.z = out.per_step.front();
      break;
    case RecurrentKind::kGru: {
      const auto w = model.gru_weights();
      Var h = tape.constant(Tensor::matrix(graph.n_rows, hidden));
      for (const auto& x : out.per_step) h = diff::gru_cell(x, h, w);
      out.z = h;
      break;
    }
    case RecurrentKind::kLstm: {
      const auto w = model.lstm_weights();
      Var state = tape.constant(Tensor::matrix(graph.n_rows, 2 * hidden));
      for (const auto& x : out.per_step) state = diff::lstm_cell(x, state, w);
      out.z = diff::slice_cols(state, 0, hidden);
      break;
    }
  }
  return out;
}

Var edge_logits(const BoundModel& model, Var z, const EncoderGraph& graph,
                std::span<const Edge> edges) {
  const ModelConfig& config = model.config();
  auto user_rows = std::make_shared<std::vector<std::uint32_t>>();
  auto item_rows = std::make_shared<std::vector<std::uint32_t>>();
  user_rows->reserve(edges.size());
  item_rows->reserve(edges.size());
  for (const auto& e : edges) {
    if (e.user >= graph.n_users || e.item >= graph.n_items) {
      throw DomainError("edge refers to a node outside the encoder graph");
    }
    user_rows->push_back(graph.user_row(e.user));
    item_rows->push_back(graph.item_row(e.item));
  }
  std::vector<Var> scores;
  scores.reserve(config.basis_count);
  for (std::size_t s = 0; s < config.basis_count; ++s) {
    const Var projected = diff::matmul(z, model.param("decoder.basis." + std::to_string(s)));
    scores.push_back(diff::gather_dot(projected, z, user_rows, item_rows));
  }
  const Var basis_scores = scores.size() == 1 ? scores.front() : diff::concat_cols(scores);
  return diff::matmul(basis_scores, model.param("decoder.coeff"));
}

namespace {

Tensor take_rows(const Tensor& z, const EncoderGraph& graph, std::size_t offset, std::size_t count) {
  Tensor out = Tensor::matrix(count, z.cols());
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t row = graph.row_of_node[offset + i];
    std::copy_n(z.data() + row * z.cols(), z.cols(), out.data() + i * z.cols());
  }
  return out;
}

}  // namespace

NodeEncodings encode(const ModelParameters& params, const ModelConfig& config,
                     const EncoderGraph& graph, bool training, std::uint64_t seed) {
  Tape tape;
  BoundModel model(tape, params, config);
  SeedSequence seeds(seed);
  const auto enc = encode_sequence(model, graph, training, seeds);
  NodeEncodings out;
  out.users = take_rows(enc.z.value(), graph, 0, graph.n_users);
  out.items = take_rows(enc.z.value(), graph, graph.n_users, graph.n_items);
  if (config.recurrent != RecurrentKind::kNone) {
    for (const auto& step : enc.per_step) {
      out.step_users.push_back(take_rows(step.value(), graph, 0, graph.n_users));
      out.step_items.push_back(take_rows(step.value(), graph, graph.n_users, graph.n_items));
    }
  }
  return out;
}

NodeEncodings encode_adjacency(const ModelParameters& params, const ModelConfig& config,
                               const AdjacencyStructure& adj, bool training, std::uint64_t seed) {
  if (adj.n_users != config.n_users || adj.n_items != config.n_items ||
      adj.n_levels != config.n_levels()) {
    throw ShapeError("adjacency does not match the model's node universe");
  }
  ModelConfig single = config;
  single.recurrent = RecurrentKind::kNone;
  single.steps = 1;
  const EncoderGraph graph = prepare_encoder_graph(std::span<const AdjacencyStructure>(&adj, 1));
  Tape tape;
  BoundModel model(tape, params, single);
  SeedSequence seeds(seed);
  const Var z = encode_step(model, graph.steps.front(), graph.n_rows, training, seeds);
  NodeEncodings out;
  out.users = take_rows(z.value(), graph, 0, graph.n_users);
  out.items = take_rows(z.value(), graph, graph.n_users, graph.n_items);
  return out;
}

Tensor gru_step(const ModelParameters& params, const Tensor& x, const Tensor& h_prev) {
  Tape tape;
  const auto c = [&](const char* name) { return tape.constant(params.at(name)); };
  const diff::GruWeights w{c("gru.w_update"), c("gru.w_reset"), c("gru.w_candidate"),
                           c("gru.u_update"), c("gru.u_reset"), c("gru.u_candidate"),
                           c("gru.b_update"), c("gru.b_reset"), c("gru.b_candidate")};
  return diff::gru_cell(tape.constant(x), tape.constant(h_prev), w).value();
}

std::pair<Tensor, Tensor> lstm_step(const ModelParameters& params, const Tensor& x,
                                    const Tensor& h_prev, const Tensor& c_prev) {
  if (h_prev.rows() != c_prev.rows() || h_prev.cols() != c_prev.cols()) {
    throw ShapeError("lstm_step: h and c shapes differ");
  }
  Tape tape;
  const auto c = [&](const char* name) { return tape.constant(params.at(name)); };
  const diff::LstmWeights w{c("lstm.w_input"),  c("lstm.w_forget"), c("lstm.w_output"),
                            c("lstm.w_cell"),   c("lstm.u_input"),  c("lstm.u_forget"),
                            c("lstm.u_output"), c("lstm.u_cell"),   c("lstm.b_input"),
                            c("lstm.b_forget"), c("lstm.b_output"), c("lstm.b_cell")};
  const std::size_t rows = h_prev.rows();
  const std::size_t hidden = h_prev.cols();
  Tensor state = Tensor::matrix(rows, 2 * hidden);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < hidden; ++j) {
      state(i, j) = h_prev(i, j);
      state(i, hidden + j) = c_prev(i, j);
    }
  }
  const Tensor& next = diff::lstm_cell(tape.constant(x), tape.constant(std::move(state)), w).value();
  Tensor h = Tensor::matrix(rows, hidden);
  Tensor cell = Tensor::matrix(rows, hidden);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < hidden; ++j) {
      h(i, j) = next(i, j);
      cell(i, j) = next(i, hidden + j);
    }
  }
  return {std::move(h), std::move(cell)};
}

// ---------------------------------------------------------------------------
// Decoder and prediction

std::vector<double> decode(std::span<const double> z_user, std::span<const double> z_item,
                           const ModelParameters& params, const ModelConfig& config) {
  const std::size_t d = config.z_dim();
  if (z_user.size() != d || z_item.size() != d) {
    throw ShapeError("decode: encodings must have z_dim = " + std::to_string(d) + " entries");
  }
  const Tensor& coeff = params.at("decoder.coeff");
  std::vector<double> basis_scores(config.basis_count);
  for (std::size_t s = 0; s < config.basis_count; ++s) {
    const Tensor& p = params.at("decoder.basis." + std::to_string(s));
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < d; ++j) row += p(i, j) * z_item[j];
      acc += z_user[i] * row;
    }
    basis_scores[s] = acc;
  }
  Tensor logits = Tensor::matrix(1, config.n_levels());
  for (std::size_t r = 0; r < config.n_levels(); ++r) {
    for (std::size_t s = 0; s < config.basis_count; ++s) logits[r] += coeff(s, r) * basis_scores[s];
  }
  if (!logits.all_finite()) throw NumericError("decode: non-finite logits");
  const Tensor probs = diff::softmax_rows(logits);
  return {probs.values().begin(), probs.values().end()};
}

double negative_log_likelihood(std::span<const std::vector<double>> probabilities,
                               std::span<const std::uint32_t> targets) {
  if (probabilities.empty()) throw DomainError("loss over an empty edge set");
  if (probabilities.size() != targets.size()) throw ShapeError("one target per prediction required");
  double total = 0.0;
  for (std::size_t e = 0; e < targets.size(); ++e) {
    if (targets[e] >= probabilities[e].size()) throw DomainError("target level out of range");
    total -= std::log(probabilities[e][targets[e]]);
  }
  return total;
}

double predict_rating(std::span<const double> probabilities, std::span<const int> levels) {
  if (probabilities.size() != levels.size()) {
    throw ShapeError("predict_rating: one probability per rating level required");
  }
  double mass = 0.0;
  double expectation = 0.0;
  for (std::size_t r = 0; r < levels.size(); ++r) {
    if (probabilities[r] < 0.0) throw DomainError("predict_rating: negative probability");
    mass += probabilities[r];
    expectation += levels[r] * probabilities[r];
  }
  if (std::abs(mass - 1.0) > 1e-9) {
    throw DomainError("predict_rating: probabilities sum to " + std::to_string(mass));
  }
  return expectation;
}

std::vector<double> predict_edges(const ModelParameters& params, const ModelConfig& config,
                                  const EncoderGraph& graph, std::span<const Edge> edges) {
  Tape tape;
  BoundModel model(tape, params, config);
  SeedSequence seeds(0);
  const auto enc = encode_sequence(model, graph, /*training=*/false, seeds);
  const Tensor probs = diff::softmax_rows(edge_logits(model, enc.z, graph, edges).value());
  std::vector<double> out(edges.size());
  const std::size_t k = probs.cols();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    out[e] = predict_rating(std::span<const double>(probs.data() + e * k, k), config.rating_levels);
  }
  return out;
}

}  // namespace tgcmc
