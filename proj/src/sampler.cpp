#include "liahr/sampler.hpp"

#include <stdexcept>

#include "liahr/hash.hpp"

namespace liahr {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

SeededSampler::SeededSampler(std::uint64_t seed, std::string stream)
    : seed_(seed), stream_(std::move(stream)), engine_(mix64(seed ^ mix64(fnv1a64(stream_)))) {}

SeededSampler SeededSampler::child(const std::string& suffix) const {
  return SeededSampler(seed_, stream_ + "/" + suffix);
}

std::uint64_t SeededSampler::uniform_index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index(0)");
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double SeededSampler::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

}  // namespace liahr
