#pragma once

#include <cstdint>

namespace sommab {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Key of the stream used by run `run_index` of an experiment seeded with
/// `base_seed`.
constexpr std::uint64_t derive_run_key(std::uint64_t base_seed,
                                       std::uint64_t run_index) noexcept {
  return mix64(mix64(base_seed) ^ mix64(run_index + 0x632be59bd9b4e019ULL));
}

/// Counter-based random stream. Every draw is a pure function of
/// (key, round, arm, lane), so a run reproduces bit-for-bit regardless of
/// the order in which other runs execute or how many threads exist.
class CounterStream {
 public:
  constexpr explicit CounterStream(std::uint64_t key) noexcept : key_(key) {}

  constexpr std::uint64_t key() const noexcept { return key_; }

  constexpr std::uint64_t bits(std::uint64_t round, std::uint64_t arm,
                               std::uint64_t lane) const noexcept {
    std::uint64_t x = mix64(key_ ^ round);
    x = mix64(x ^ (arm * 0xd1342543de82ef95ULL));
    return mix64(x ^ (lane * 0xaf251af3b0f025b5ULL + 1));
  }

  /// Uniform in [0, 1).
  constexpr double uniform(std::uint64_t round, std::uint64_t arm,
                           std::uint64_t lane) const noexcept {
    return static_cast<double>(bits(round, arm, lane) >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t key_;
};

}  // namespace sommab
