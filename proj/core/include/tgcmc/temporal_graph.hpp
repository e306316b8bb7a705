#ifndef TGCMC_TEMPORAL_GRAPH_HPP_
#define TGCMC_TEMPORAL_GRAPH_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tgcmc/dataset.hpp"

namespace tgcmc {

// An observed (user, rating level, item) triple.
struct Edge {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  std::uint32_t level = 0;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Edges of ratings[range], in dataset (chronological) order.
std::vector<Edge> edges_in(const RatingsDataset& ds, IndexRange range);

enum class SequenceMode { kStatic, kDisjoint, kIncremental };

SequenceMode parse_sequence_mode(std::string_view name);
std::string_view to_string(SequenceMode mode);

// The dynamic graph M^(1..T).
struct MatrixSequence {
  SequenceMode mode = SequenceMode::kStatic;
  std::vector<std::vector<Edge>> steps;

  std::size_t length() const { return steps.size(); }
};

// Splits time-ordered edges into `steps` contiguous chunks. The first
// (|edges| mod steps) chunks hold one extra edge.
std::vector<std::vector<Edge>> chunk_edges(std::span<const Edge> edges, std::size_t steps);

// Disjoint: steps are the chunks. Incremental: step t is the union of
// chunks 0..t. Static: exactly one chunk, used as-is.
MatrixSequence build_sequence(std::vector<std::vector<Edge>> chunks, SequenceMode mode);

// Chunks `edges` and builds the sequence in one go. Static ignores `steps`.
MatrixSequence make_sequence(std::span<const Edge> edges, SequenceMode mode, std::size_t steps);

enum class NormScheme { kLeft, kSymmetric };

NormScheme parse_norm_scheme(std::string_view name);
std::string_view to_string(NormScheme scheme);

// CSR neighbor lists for one side and one rating level. `norm[k]` is the
// normalization constant c for the k-th stored neighbor, seen from the
// receiving node.
struct NeighborLists {
  std::vector<std::size_t> offsets;  // size n + 1
  std::vector<std::uint32_t> neighbors;
  std::vector<double> norm;

  std::size_t nodes() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::span<const std::uint32_t> neighbors_of(std::size_t node) const {
    return {neighbors.data() + offsets[node], offsets[node + 1] - offsets[node]};
  }
  std::span<const double> norm_of(std::size_t node) const {
    return {norm.data() + offsets[node], offsets[node + 1] - offsets[node]};
  }
};

struct AdjacencyStructure {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t n_levels = 0;
  NormScheme scheme = NormScheme::kLeft;
  // Indexed by rating level.
  std::vector<NeighborLists> user_neighbors;  // items adjacent to each user
  std::vector<NeighborLists> item_neighbors;  // users adjacent to each item
  // Degrees summed over all levels.
  std::vector<std::size_t> user_degree;
  std::vector<std::size_t> item_degree;

  std::size_t edge_count() const;
};

// Throws DomainError on a repeated (user, item) pair or an out-of-range index.
AdjacencyStructure build_adjacency(std::span<const Edge> edges, std::size_t n_users,
                                   std::size_t n_items, std::size_t n_levels, NormScheme scheme);

// Flattens the user-side lists back into a sorted edge list.
std::vector<Edge> adjacency_edges(const AdjacencyStructure& adj);

// Per-step edge counts as a JSON document (debug aid).
std::string sequence_summary_json(const MatrixSequence& seq);

}  // namespace tgcmc

#endif  // TGCMC_TEMPORAL_GRAPH_HPP_
