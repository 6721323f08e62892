#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace dfl::rng {

// Every random draw in the library comes from a purpose-named stream so that
// adding a consumer (say, soft-filter acceptance) never shifts the draws seen
// by another (hypothesis generation, splits, ...).

std::uint64_t fnv1a(std::string_view text);

/// SplitMix64 finalizer; good avalanche, used to mix seeds.
std::uint64_t mix(std::uint64_t a, std::uint64_t b);

/// Seed for the stream identified by (master, purpose, index).
std::uint64_t stream_seed(std::uint64_t master, std::string_view purpose,
                          std::uint64_t index = 0);

/// A seeded PRNG stream with fully specified output: mt19937_64 for bits,
/// explicit Box-Muller for gaussians, so results are reproducible across
/// standard libraries.
class Stream {
 public:
  Stream(std::uint64_t master, std::string_view purpose,
         std::uint64_t index = 0)
      : gen_(stream_seed(master, purpose, index)) {}

  explicit Stream(std::uint64_t raw_seed) : gen_(raw_seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1), 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in (lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (cached spare).
  double gaussian();

  /// Uniform integer in [0, bound), rejection-sampled (bound > 0).
  std::uint64_t below(std::uint64_t bound);

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dfl::rng
