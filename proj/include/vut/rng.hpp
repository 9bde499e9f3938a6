#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <vector>

namespace vut {

// Counter-based random streams. Every draw is a pure function of
// (seed, stream name, key indices, counter), so any stream can be replayed in
// isolation and parallel consumers cannot perturb each other.
class RngStream {
 public:
  RngStream() = default;
  RngStream(uint64_t seed, std::string_view name,
            std::initializer_list<uint64_t> keys = {}) {
    state_ = mix(seed ^ 0x9e3779b97f4a7c15ull);
    for (char c : name) state_ = mix(state_ ^ static_cast<uint64_t>(c));
    for (uint64_t k : keys) state_ = mix(state_ ^ k);
  }

  // Derive a child stream without consuming from this one.
  RngStream child(std::string_view name,
                  std::initializer_list<uint64_t> keys = {}) const {
    RngStream s;
    s.state_ = state_;
    for (char c : name) s.state_ = mix(s.state_ ^ static_cast<uint64_t>(c));
    for (uint64_t k : keys) s.state_ = mix(s.state_ ^ k);
    return s;
  }

  uint64_t next_u64() { return mix(state_ ^ ++counter_); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n). n must be positive.
  int64_t uniform_int(int64_t n) {
    return static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n));
  }

  bool bernoulli(double p) { return uniform() < p; }

  double gaussian() {
    // Box-Muller; one fresh pair per call keeps the stream stateless apart
    // from the counter.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double gaussian(double mean, double stddev) {
    return mean + stddev * gaussian();
  }

  // Categorical draw proportional to non-negative weights.
  size_t categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double r = uniform() * total;
    double acc = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (r < acc) return i;
    }
    return weights.size() - 1;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(static_cast<int64_t>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  // SplitMix64 finalizer.
  static uint64_t mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  uint64_t state_ = 0;
  uint64_t counter_ = 0;
};

}  // namespace vut
