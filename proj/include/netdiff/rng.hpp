#pragma once

#include <cstdint>
#include <initializer_list>

namespace netdiff {

/// Counter-based generator: every draw is a pure function of a key tuple, so
/// draws do not depend on evaluation order or on how work is split across threads.
class CounterRng {
 public:
  constexpr explicit CounterRng(std::uint64_t seed = 0) noexcept : seed_(seed) {}

  /// Child generator whose keys are prefixed by `stream`.
  constexpr CounterRng split(std::uint64_t stream) const noexcept { return CounterRng(mix(seed_ ^ mix(stream + 0x632be59bd9b4e019ULL))); }

  constexpr std::uint64_t seed() const noexcept { return seed_; }

  /// 64 random bits for the key.
  constexpr std::uint64_t bits(std::initializer_list<std::uint64_t> key) const noexcept {
    std::uint64_t h = mix(seed_ + 0x9e3779b97f4a7c15ULL);
    std::uint64_t k = 0;
    for (auto part : key) h = mix(h ^ mix(part + 0x9e3779b97f4a7c15ULL * ++k));
    return h;
  }

  /// Uniform on (0, 1]: a threshold test u <= x is never true for x = 0 and always for x = 1.
  constexpr double uniform(std::initializer_list<std::uint64_t> key) const noexcept {
    return static_cast<double>((bits(key) >> 11) + 1) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n, std::initializer_list<std::uint64_t> key) const noexcept {
    // 128-bit multiply-shift; bias is below 2^-64 * n.
    const unsigned __int128 prod = static_cast<unsigned __int128>(bits(key)) * n;
    return static_cast<std::uint64_t>(prod >> 64);
  }

 private:
  // SplitMix64 finalizer.
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
};

}  // namespace netdiff
