#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace pacomm {

// xoshiro256++ with splitmix64 seeding.  Streams derived from
// (master_seed, stream_index) are independent for Monte Carlo use:
// each index seeds a fresh splitmix64 chain, so trial streams never
// share state and results are reproducible under any worker count.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) { reseed(seed, 0); }
  RngStream(std::uint64_t master_seed, std::uint64_t stream_index) {
    reseed(master_seed, stream_index);
  }

  void reseed(std::uint64_t master_seed, std::uint64_t stream_index) {
    std::uint64_t x = master_seed ^ (0x9e3779b97f4a7c15ULL * (stream_index + 1));
    for (auto& word : state_) word = splitmix64(x);
    // all-zero state is invalid for xoshiro
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // uniform in [0, 1) with 53 random bits
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, bound), unbiased (rejection on the top range)
  std::uint64_t uniform_below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("uniform_below: bound must be positive");
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t x = next_u64();
      if (x >= threshold) return x % bound;
    }
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Exp(rate); strictly positive
  double exponential(double rate) {
    double u;
    do { u = uniform01(); } while (u == 0.0);
    return -std::log(u) / rate;
  }

  // index sampled proportionally to non-negative weights
  int discrete(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw std::invalid_argument("discrete: weights must have positive sum");
    double x = uniform01() * total;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      x -= weights[i];
      if (x < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size() - 1);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_[4];
};

}  // namespace pacomm
