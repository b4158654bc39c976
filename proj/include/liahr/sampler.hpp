#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>

namespace liahr {

/// Reproducible random stream identified by (seed, stream id).
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard; all derived draws (indices, doubles, shuffles) are computed here
/// rather than through <random> distributions, whose algorithms are
/// implementation-defined. Identical (seed, stream, call sequence) therefore
/// gives identical draws on every platform.
class SeededSampler {
 public:
  SeededSampler(std::uint64_t seed, std::string stream);

  std::uint64_t seed() const { return seed_; }
  const std::string& stream() const { return stream_; }

  /// Derived sampler for a sub-stream "<stream>/<suffix>".
  SeededSampler child(const std::string& suffix) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);
  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();
  bool bernoulli(double p) { return uniform01() < p; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(uniform_index(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::string stream_;
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer; used to derive engine seeds and hash-keyed draws.
std::uint64_t mix64(std::uint64_t x);

}  // namespace liahr
