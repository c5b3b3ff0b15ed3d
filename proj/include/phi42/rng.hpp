#pragma once

// Counter-based random numbers: every draw is a pure function of its key, so
// replicas, steps and modes can be evaluated in any order (or twice) and
// always see the same values.

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace phi42 {

namespace detail {

constexpr std::uint64_t splitmix_finalize(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

constexpr std::uint64_t hash_key(std::initializer_list<std::uint64_t> words) noexcept {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t w : words) {
    h = detail::splitmix_finalize(h + 0x9e3779b97f4a7c15ULL + w);
  }
  return h;
}

// Uniform in the open interval (0, 1).
constexpr double to_unit_open(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Stateless generator for one logical stream (seed, replica).
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t replica) noexcept
      : base_(hash_key({seed, replica})) {}

  constexpr std::uint64_t bits(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                               std::uint64_t d = 0) const noexcept {
    return hash_key({base_, a, b, c, d});
  }

  double uniform(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                 std::uint64_t d = 0) const noexcept {
    return to_unit_open(bits(a, b, c, d));
  }

  // Box-Muller pair keyed by (a, b, c); both outputs are independent N(0,1).
  std::array<double, 2> normal_pair(std::uint64_t a, std::uint64_t b = 0,
                                    std::uint64_t c = 0) const noexcept {
    const double u1 = uniform(a, b, c, 0);
    const double u2 = uniform(a, b, c, 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(phi), r * std::sin(phi)};
  }

  double exponential(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const noexcept {
    return -std::log(uniform(a, b, c, 2));
  }

  std::uint64_t key() const noexcept { return base_; }

  /// Sequential sub-stream keyed by (a, b): draw i costs one finalizer call.
  class Stream {
   public:
    explicit constexpr Stream(std::uint64_t base) noexcept : base_(base) {}
    constexpr std::uint64_t bits(std::uint64_t i) const noexcept {
      return detail::splitmix_finalize(base_ + (i + 1) * 0x9e3779b97f4a7c15ULL);
    }
    double uniform(std::uint64_t i) const noexcept { return to_unit_open(bits(i)); }

   private:
    std::uint64_t base_;
  };

  constexpr Stream stream(std::uint64_t a, std::uint64_t b = 0) const noexcept { return Stream(bits(a, b, 0x5157)); }

 private:
  std::uint64_t base_;
};

}  // namespace phi42
