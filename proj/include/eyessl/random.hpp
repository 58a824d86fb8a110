#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace eyessl {

// Single-owner deterministic random stream. Every stochastic decision in a
// run (augmentation, batch order, weight init) is drawn from one of these.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  int uniform_int(int lo, int hi);        // inclusive
  std::size_t index(std::size_t n);       // [0, n)
  bool bernoulli(double p);
  double normal(double mean = 0.0, double stddev = 1.0);

  // Independent child stream; does not advance this stream.
  RandomStream derive(std::uint64_t stream_id) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

inline RandomStream seeded_rng(std::uint64_t seed) { return RandomStream(seed); }

}  // namespace eyessl
