#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace relic {

// xoshiro256++ with splitmix64 seeding. We carry our own generator (instead
// of std::mt19937 + std:: distributions) because the state must serialize
// into checkpoints as four u64 words and every draw must be reproducible
// across builds. Distribution mappings below are fixed and stateless so a
// restored state continues the exact stream.
class Rng {
 public:
  Rng() : Rng(0x9e3779b97f4a7c15ULL) {}

  explicit Rng(std::uint64_t seed) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
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

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller. The second value of the pair is
  // discarded so the draw count per call is fixed (no cached state).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Integer in [0, n). Multiply-shift mapping; requires n >= 1.
  std::uint64_t below(std::uint64_t n) {
    const auto wide =
        static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n);
    return static_cast<std::uint64_t>(wide >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Deterministic child stream for (worker, batch)-style addressing. The
  // derivation depends only on the parent's seed words and the key, not on
  // how many draws the parent has made.
  Rng derive(std::uint64_t key_a, std::uint64_t key_b = 0) const {
    std::uint64_t x = state_[0] ^ rotl(key_a, 32) ^ key_b;
    x = splitmix64(x) ^ state_[1];
    Rng child;
    child.state_[0] = splitmix64(x);
    child.state_[1] = splitmix64(x);
    child.state_[2] = splitmix64(x);
    child.state_[3] = splitmix64(x);
    return child;
  }

  std::array<std::uint64_t, 4> state() const { return state_; }

  void set_state(const std::array<std::uint64_t, 4>& s) { state_ = s; }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
};

}  // namespace relic
