#include "tgcmc/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tgcmc/error.hpp"
#include "tgcmc/rng.hpp"

namespace tgcmc {
namespace {

std::vector<std::size_t> shuffled(std::size_t n, RngStream& rng) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
  return v;
}

// n distinct cells of the grid; the first max(n_users, n_items) cover every
// row and column.
std::vector<std::pair<std::size_t, std::size_t>> pick_pairs(std::size_t n_users, std::size_t n_items,
                                                            std::size_t n, RngStream& rng) {
  if (n > n_users * n_items) throw DomainError("more ratings requested than user-item pairs");
  std::vector<bool> taken(n_users * n_items, false);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const std::size_t cover = std::min(n, std::max(n_users, n_items));
  const auto us = shuffled(n_users, rng);
  const auto vs = shuffled(n_items, rng);
  for (std::size_t k = 0; k < cover; ++k) {
    const std::size_t u = us[k % n_users];
    const std::size_t v = vs[k % n_items];
    if (!taken[u * n_items + v]) {
      taken[u * n_items + v] = true;
      pairs.emplace_back(u, v);
    }
  }
  for (const auto cell : shuffled(n_users * n_items, rng)) {
    if (pairs.size() == n) break;
    if (!taken[cell]) {
      taken[cell] = true;
      pairs.emplace_back(cell / n_items, cell % n_items);
    }
  }
  return pairs;
}

}  // namespace

std::vector<RawRating> planted_factor_ratings(std::size_t n_users, std::size_t n_items,
                                              std::size_t n_ratings, std::size_t rank,
                                              std::uint64_t seed) {
  if (rank == 0) throw DomainError("rank must be positive");
  RngStream rng(splitmix64(seed));
  std::vector<double> uf(n_users * rank);
  std::vector<double> vf(n_items * rank);
  for (auto& x : uf) x = rng.normal();
  for (auto& x : vf) x = rng.normal();
  const auto pairs = pick_pairs(n_users, n_items, n_ratings, rng);
  const auto times = shuffled(pairs.size(), rng);
  std::vector<RawRating> out;
  out.reserve(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [u, v] = pairs[k];
    double dot = 0.0;
    for (std::size_t f = 0; f < rank; ++f) dot += uf[u * rank + f] * vf[v * rank + f];
    const double score = 3.0 + 1.5 * dot / std::sqrt(static_cast<double>(rank));
    const int rating = static_cast<int>(std::clamp(std::round(score), 1.0, 5.0));
    out.push_back(RawRating{static_cast<std::int64_t>(u + 1), static_cast<std::int64_t>(v + 1), rating,
                            static_cast<std::int64_t>(times[k])});
  }
  return out;
}

std::vector<RawRating> random_ratings(std::size_t n_users, std::size_t n_items,
                                      std::size_t n_ratings, std::uint64_t seed) {
  RngStream rng(splitmix64(seed ^ 0x5bd1e995ULL));
  const auto pairs = pick_pairs(n_users, n_items, n_ratings, rng);
  const auto times = shuffled(pairs.size(), rng);
  std::vector<RawRating> out;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    out.push_back(RawRating{static_cast<std::int64_t>(pairs[k].first + 1),
                            static_cast<std::int64_t>(pairs[k].second + 1),
                            static_cast<int>(1 + rng.below(5)), static_cast<std::int64_t>(times[k])});
  }
  return out;
}

}  // namespace tgcmc
