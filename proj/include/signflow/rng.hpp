#pragma once

#include <cmath>
#include <cstdint>

namespace signflow {

// Small deterministic generator (splitmix64).  Every randomized routine in the
// project derives one of these from an explicit seed so that reruns with the
// same configuration are bit-identical; nothing uses std::random_device or the
// distribution templates (whose output is implementation-defined).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in the open interval (0, 1): never returns an exact endpoint, so
  // logs and inversions are safe.
  double uniform01() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Standard normal via Box-Muller; consumes exactly two raw draws per call.
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Decorrelated substream for (seed, index) pairs; used to make per-sample
  // streams independent of evaluation order.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
    SplitMix64 g(seed ^ (0x632be59bd9b4e019ull + index * 0x9e3779b97f4a7c15ull));
    g.next();
    return g.next();
  }

 private:
  std::uint64_t state_;
};

}  // namespace signflow
