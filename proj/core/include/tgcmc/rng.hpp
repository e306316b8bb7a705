#ifndef TGCMC_RNG_HPP_
#define TGCMC_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>

namespace tgcmc {

// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// A single random stream. Draws are defined bit-for-bit (no reliance on
// implementation-defined std distributions).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n) {
    // Lemire-style rejection keeps the draw unbiased.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  // Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::mt19937_64 engine_;
};

// Master seed plus a counter. Every consumer asks for a fresh stream in
// program order, so draws depend on call order only.
class SeedSequence {
 public:
  explicit SeedSequence(std::uint64_t master) : master_(master) {}

  RngStream next_stream() { return RngStream(derive(counter_++)); }

  std::uint64_t derive(std::uint64_t index) const {
    return splitmix64(splitmix64(master_) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
  }

  std::uint64_t master() const { return master_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t master_;
  std::uint64_t counter_ = 0;
};

}  // namespace tgcmc

#endif  // TGCMC_RNG_HPP_
