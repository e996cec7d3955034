#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace favi {

// Deterministic random stream. Every experiment derives all of its randomness
// from one root seed through named substreams, so runs are bit-reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent stream keyed by (this stream's seed, name).
  Rng substream(std::string_view name) const;
  Rng substream(std::string_view name, std::uint64_t index) const;

  std::uint64_t next_u64();
  double uniform();                      // [0, 1)
  double uniform(double a, double b);
  double normal();                       // Marsaglia polar, cached pair
  double normal(double mu, double sigma);
  std::size_t uniform_index(std::size_t n);  // {0, ..., n-1}, n > 0

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace favi
