#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace pmf {

/// Named, independently seeded random stream. Every stochastic operation takes
/// one of these explicitly; streams are derived from (run seed, stage name,
/// index) so that work split across threads draws the same numbers as a
/// sequential run.
///
/// The engine is std::mt19937_64 (fully specified by the standard); the
/// conversions to uniform/normal variates are done here rather than through
/// <random> distributions, whose outputs differ between standard libraries.
class RngStream {
 public:
  RngStream(std::uint64_t run_seed, std::string_view stream, std::uint64_t index = 0);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0,1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi], unbiased.
  int uniform_int(int lo, int hi);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(0, static_cast<int>(i - 1)));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Child stream keyed by a sub-name, independent of this stream's position.
  RngStream derive(std::string_view name, std::uint64_t index = 0) const;

 private:
  explicit RngStream(std::uint64_t key);

  std::uint64_t key_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t hash_name(std::string_view name) noexcept;

}  // namespace pmf
