#include "favi/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace favi {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t hash_name(std::string_view name) {
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t s = seed;
  // expand the seed so nearby root seeds give unrelated streams
  std::uint64_t a = splitmix64(s);
  std::uint64_t b = splitmix64(s);
  gen_.seed(a ^ (b << 1));
}

Rng Rng::substream(std::string_view name) const {
  std::uint64_t s = seed_ ^ hash_name(name);
  std::uint64_t tmp = s;
  return Rng(splitmix64(tmp));
}

Rng Rng::substream(std::string_view name, std::uint64_t index) const {
  std::uint64_t s = seed_ ^ hash_name(name) ^ (0x9e3779b97f4a7c15ULL * (index + 1));
  std::uint64_t tmp = s;
  return Rng(splitmix64(tmp));
}

std::uint64_t Rng::next_u64() { return gen_(); }

double Rng::uniform() {
  // 53-bit mantissa in [0,1)
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double a, double b) { return a + (b - a) * uniform(); }

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  double f = std::sqrt(-2.0 * std::log(s) / s);
  cached_ = v * f;
  has_cached_ = true;
  return u * f;
}

double Rng::normal(double mu, double sigma) { return mu + sigma * normal(); }

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("rng: uniform_index(0)");
  // rejection to avoid modulo bias
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = gen_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

}  // namespace favi
