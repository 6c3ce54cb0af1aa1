#pragma once

#include <cstdint>
#include <string_view>

namespace topotext {

/// splitmix64 step; used to expand a single u64 seed into generator state.
std::uint64_t splitmix64(std::uint64_t& state);

/// xoshiro256** generator. All randomness in the library flows through this
/// type so results are reproducible across platforms and standard libraries.
///
/// Independent consumers take a named sub-stream via `stream("name")`; the
/// child seed is a hash of (parent seed, name), so adding a new consumer never
/// perturbs the draws of an existing one.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller (one spare value is cached).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  Rng stream(std::string_view name) const;
  Rng stream(std::uint64_t index) const;

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace topotext
