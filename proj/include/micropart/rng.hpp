#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace micropart {

// xoshiro256++ with splitmix64 seeding (Blackman & Vigna). Small, fast, and
// forkable: fork() derives a statistically independent substream, which is
// how per-particle and per-replicate streams are made, so results do not
// depend on thread count.
class Rng {
public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<std::uint64_t>::max(); }

  result_type operator()() {
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

  // Deterministic substream: mixes the current state with a stream tag.
  Rng fork(std::uint64_t tag) const {
    std::uint64_t x = state_[0] ^ rotl(state_[2], 29) ^ (tag * 0x9e3779b97f4a7c15ULL + 1);
    Rng child;
    for (auto& word : child.state_) word = splitmix64(x);
    return child;
  }

  // uniform on (0,1); never returns 0 or 1 exactly
  double uniform() {
    const std::uint64_t bits = (*this)() >> 11;  // 53 bits
    double u = (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double exponential() { return -std::log(uniform()); }

  double normal();                        // standard normal via inverse CDF
  double gamma(double shape, double rate);  // Marsaglia-Tsang
  long poisson(double mean);

private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  std::uint64_t state_[4] = {1, 2, 3, 4};
};

}  // namespace micropart
