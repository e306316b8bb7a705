#include "tgcmc/temporal_graph.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <unordered_set>

#include "tgcmc/error.hpp"

namespace tgcmc {

std::vector<Edge> edges_in(const RatingsDataset& ds, IndexRange range) {
  if (range.end > ds.size() || range.begin > range.end) {
    throw DomainError("index range outside dataset");
  }
  std::vector<Edge> out;
  out.reserve(range.size());
  for (std::size_t i = range.begin; i < range.end; ++i) {
    const auto& r = ds.ratings[i];
    out.push_back(Edge{r.user, r.item, r.level});
  }
  return out;
}

SequenceMode parse_sequence_mode(std::string_view name) {
  if (name == "static") return SequenceMode::kStatic;
  if (name == "disjoint") return SequenceMode::kDisjoint;
  if (name == "incremental") return SequenceMode::kIncremental;
  throw ConfigError("unknown sequence mode '" + std::string(name) +
                    "' (expected static, disjoint or incremental)");
}

std::string_view to_string(SequenceMode mode) {
  switch (mode) {
    case SequenceMode::kStatic:
      return "static";
    case SequenceMode::kDisjoint:
      return "disjoint";
    case SequenceMode::kIncremental:
      return "incremental";
  }
  return "?";
}

std::vector<std::vector<Edge>> chunk_edges(std::span<const Edge> edges, std::size_t steps) {
  if (steps == 0) throw DomainError("step count must be positive");
  if (edges.size() < steps) {
    throw DomainError("cannot split " + std::to_string(edges.size()) + " edges into " +
                      std::to_string(steps) + " steps");
  }
  const std::size_t base = edges.size() / steps;
  const std::size_t extra = edges.size() % steps;
  std::vector<std::vector<Edge>> chunks;
  chunks.reserve(steps);
  std::size_t pos = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    const std::size_t len = base + (t < extra ? 1 : 0);
    chunks.emplace_back(edges.begin() + pos, edges.begin() + pos + len);
    pos += len;
  }
  return chunks;
}

MatrixSequence build_sequence(std::vector<std::vector<Edge>> chunks, SequenceMode mode) {
  if (chunks.empty()) throw DomainError("sequence needs at least one chunk");
  MatrixSequence seq;
  seq.mode = mode;
  switch (mode) {
    case SequenceMode::kStatic:
      if (chunks.size() != 1) throw DomainError("static sequence must have exactly one step");
      seq.steps = std::move(chunks);
      break;
    case SequenceMode::kDisjoint:
      seq.steps = std::move(chunks);
      break;
    case SequenceMode::kIncremental: {
      std::vector<Edge> acc;
      for (auto& chunk : chunks) {
        acc.insert(acc.end(), chunk.begin(), chunk.end());
        seq.steps.push_back(acc);
      }
      break;
    }
  }
  return seq;
}

MatrixSequence make_sequence(std::span<const Edge> edges, SequenceMode mode, std::size_t steps) {
  if (mode == SequenceMode::kStatic) {
    return build_sequence({std::vector<Edge>(edges.begin(), edges.end())}, mode);
  }
  return build_sequence(chunk_edges(edges, steps), mode);
}

NormScheme parse_norm_scheme(std::string_view name) {
  if (name == "left") return NormScheme::kLeft;
  if (name == "symmetric") return NormScheme::kSymmetric;
  throw ConfigError("unknown normalization '" + std::string(name) +
                    "' (expected left or symmetric)");
}

std::string_view to_string(NormScheme scheme) {
  return scheme == NormScheme::kLeft ? "left" : "symmetric";
}

std::size_t AdjacencyStructure::edge_count() const {
  std::size_t n = 0;
  for (const auto& lists : user_neighbors) n += lists.neighbors.size();
  return n;
}

namespace {

NeighborLists make_lists(std::size_t n_nodes, std::span<const Edge> edges, std::uint32_t level,
                         bool user_side) {
  NeighborLists lists;
  lists.offsets.assign(n_nodes + 1, 0);
  for (const auto& e : edges) {
    if (e.level == level) ++lists.offsets[(user_side ? e.user : e.item) + 1];
  }
  for (std::size_t i = 0; i < n_nodes; ++i) lists.offsets[i + 1] += lists.offsets[i];
  lists.neighbors.resize(lists.offsets.back());
  lists.norm.resize(lists.offsets.back());
  std::vector<std::size_t> cursor(lists.offsets.begin(), lists.offsets.end() - 1);
  for (const auto& e : edges) {
    if (e.level != level) continue;
    const auto node = user_side ? e.user : e.item;
    lists.neighbors[cursor[node]++] = user_side ? e.item : e.user;
  }
  // Sorted neighbor order keeps the accumulation order independent of the
  // edge order within a step.
  for (std::size_t i = 0; i < n_nodes; ++i) {
    std::sort(lists.neighbors.begin() + lists.offsets[i], lists.neighbors.begin() + lists.offsets[i + 1]);
  }
  return lists;
}

}  // namespace

AdjacencyStructure build_adjacency(std::span<const Edge> edges, std::size_t n_users,
                                   std::size_t n_items, std::size_t n_levels, NormScheme scheme) {
  AdjacencyStructure adj;
  adj.n_users = n_users;
  adj.n_items = n_items;
  adj.n_levels = n_levels;
  adj.scheme = scheme;
  adj.user_degree.assign(n_users, 0);
  adj.item_degree.assign(n_items, 0);

  std::unordered_set<std::uint64_t> seen;
  seen.reserve(edges.size());
  for (const auto& e : edges) {
    if (e.user >= n_users || e.item >= n_items || e.level >= n_levels) {
      throw DomainError("edge index out of range");
    }
    if (!seen.insert((std::uint64_t{e.user} << 32) | e.item).second) {
      throw DomainError("duplicate edge (user " + std::to_string(e.user) + ", item " +
                        std::to_string(e.item) + ")");
    }
    ++adj.user_degree[e.user];
    ++adj.item_degree[e.item];
  }

  const auto constant = [&](std::size_t receiver_deg, std::size_t sender_deg) {
    if (scheme == NormScheme::kLeft) return static_cast<double>(receiver_deg);
    return std::sqrt(static_cast<double>(receiver_deg) * static_cast<double>(sender_deg));
  };

  for (std::uint32_t r = 0; r < n_levels; ++r) {
    auto users = make_lists(n_users, edges, r, true);
    for (std::size_t u = 0; u < n_users; ++u) {
      for (std::size_t k = users.offsets[u]; k < users.offsets[u + 1]; ++k) {
        users.norm[k] = constant(adj.user_degree[u], adj.item_degree[users.neighbors[k]]);
      }
    }
    auto items = make_lists(n_items, edges, r, false);
    for (std::size_t v = 0; v < n_items; ++v) {
      for (std::size_t k = items.offsets[v]; k < items.offsets[v + 1]; ++k) {
        items.norm[k] = constant(adj.item_degree[v], adj.user_degree[items.neighbors[k]]);
      }
    }
    adj.user_neighbors.push_back(std::move(users));
    adj.item_neighbors.push_back(std::move(items));
  }
  return adj;
}

std::vector<Edge> adjacency_edges(const AdjacencyStructure& adj) {
  std::vector<Edge> out;
  for (std::uint32_t r = 0; r < adj.n_levels; ++r) {
    const auto& lists = adj.user_neighbors[r];
    for (std::uint32_t u = 0; u < adj.n_users; ++u) {
      for (const auto v : lists.neighbors_of(u)) out.push_back(Edge{u, v, r});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string sequence_summary_json(const MatrixSequence& seq) {
  nlohmann::ordered_json j;
  j["mode"] = std::string(to_string(seq.mode));
  j["steps"] = seq.length();
  auto counts = nlohmann::json::array();
  for (const auto& step : seq.steps) counts.push_back(step.size());
  j["edges_per_step"] = counts;
  return j.dump() + "\n";
}

}  // namespace tgcmc
