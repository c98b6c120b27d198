#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "gsched/errors.hpp"

namespace gsched {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Every component that needs randomness derives its own stream from the one
// run seed; stream ids are small constants chosen by the caller.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  return splitmix64(root ^ splitmix64(stream ^ 0x5bf0363546e42869ULL));
}

// Samplers are spelled out instead of using std::*_distribution: the engine
// sequence is fixed by the standard but the distributions are not, and
// identical seeds must reproduce identical draws across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // [0,1) with 53-bit resolution
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0,n); modulo bias is negligible for the small n used here
  std::uint64_t uniform_index(std::uint64_t n) { return n ? eng_() % n : 0; }

  double exponential(double rate) {
    // inverse CDF; log1p keeps precision for small draws
    return -std::log1p(-uniform()) / rate;
  }

  double normal() {
    // Box-Muller, cosine branch only so each call consumes exactly two draws
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 0x1.0p-53) u1 = 0x1.0p-53;
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  double lognormal(double mu, double sigma) {
    return std::exp(mu + sigma * normal());
  }

  // index into weights, proportional to weight; weights need not be normalized
  std::size_t categorical(const std::vector<double>& weights) {
    if (weights.empty()) throw EngineError("categorical: empty weight vector");
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0 || !std::isfinite(w)) {
        throw EngineError("categorical: bad weight");
      }
      total += w;
    }
    if (total <= 0.0) throw EngineError("categorical: zero total weight");
    double x = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (x < acc) return i;
    }
    return weights.size() - 1;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace gsched
