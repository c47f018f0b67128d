#pragma once

#include <cstdint>
#include <random>

namespace odpp {

/// SplitMix64 finalizer. Used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Random stream used by every sampler and simulator.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Its 64-bit seed is splitmix64(splitmix64(seed) ^ stream), so
/// `Rng(seed, k)` for k = 0, 1, ... are independent named streams. Variates
/// are produced by Boost.Random distributions, which use fixed algorithms
/// (ziggurat normals, PTRS Poisson) on every platform, unlike the
/// implementation-defined std:: distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream), engine_(splitmix64(splitmix64(seed) ^ stream)) {}

  /// Child stream; deterministic function of (seed, stream, index).
  Rng split(std::uint64_t index) const {
    return Rng(splitmix64(seed_ ^ splitmix64(stream_ + 0x632be59bd9b4e019ULL)), index);
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);
  double normal();
  /// Poisson variate; mean 0 returns 0.
  std::int64_t poisson(double mean);
  bool bernoulli(double p);
  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

}  // namespace odpp
