#ifndef TGCMC_SYNTHETIC_HPP_
#define TGCMC_SYNTHETIC_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tgcmc/dataset.hpp"

namespace tgcmc {

// Ratings from a planted low-rank model on distinct random (user, item)
// pairs: rating = clamp(round(3 + 1.5 <u_i, v_j> / sqrt(rank)), 1, 5) with
// standard normal factors. Timestamps are a random permutation of 0..n-1.
std::vector<RawRating> planted_factor_ratings(std::size_t n_users, std::size_t n_items,
                                              std::size_t n_ratings, std::size_t rank,
                                              std::uint64_t seed);

// Uniformly random ratings (levels 1..5) on distinct pairs of a small
// user x item grid; every user and item id in range appears at least once
// when n_ratings >= max(n_users, n_items).
std::vector<RawRating> random_ratings(std::size_t n_users, std::size_t n_items,
                                      std::size_t n_ratings, std::uint64_t seed);

}  // namespace tgcmc

#endif  // TGCMC_SYNTHETIC_HPP_
