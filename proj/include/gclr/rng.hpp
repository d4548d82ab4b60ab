#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <vector>

namespace gclr {

// Counter-based generator: draw k of a stream is mix(key + k * golden), so a
// stream is fully described by (key, counter) and child streams derived with
// split() are independent of how many draws the parent has made.
class Rng {
 public:
  struct State {
    std::uint64_t key = 0;
    std::uint64_t counter = 0;
    bool operator==(const State&) const = default;
  };

  explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  static Rng from_state(State s) {
    Rng r(0);
    r.key_ = s.key;
    r.counter_ = s.counter;
    return r;
  }

  State state() const noexcept { return {key_, counter_}; }

  // Child stream keyed by `stream`; does not advance this generator.
  Rng split(std::uint64_t stream) const {
    Rng child(0);
    child.key_ = mix(key_ ^ mix(stream + 0x9e3779b97f4a7c15ULL));
    return child;
  }

  std::uint64_t next_u64() {
    return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n) by rejection; n > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Box-Muller without a cached spare, so every call consumes exactly two draws.
  double normal() {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(p[i - 1], p[j]);
    }
    return p;
  }

 private:
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

// Stream tags for split(); keeps the derivation of every random quantity in
// one place.
namespace stream {
inline constexpr std::uint64_t kClassMeans = 1;
inline constexpr std::uint64_t kImageMap = 2;
inline constexpr std::uint64_t kTextMap = 3;
inline constexpr std::uint64_t kSamples = 4;
inline constexpr std::uint64_t kImageEncoder = 5;
inline constexpr std::uint64_t kTextEncoder = 6;
inline constexpr std::uint64_t kShuffle = 7;
inline constexpr std::uint64_t kSplit = 8;
inline constexpr std::uint64_t kAugment = 9;
inline constexpr std::uint64_t kProbe = 10;
}  // namespace stream

}  // namespace gclr
