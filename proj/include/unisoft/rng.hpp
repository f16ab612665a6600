#pragma once

#include <cstdint>
#include <span>

namespace unisoft {

/// Deterministic random stream with platform-independent output.
///
/// The engine is xoshiro256++, seeded through SplitMix64. Per-run streams
/// are derived from (master_seed, run_index) by hashing the pair with
/// SplitMix64, so runs are independent of scheduling order. All
/// distributions are implemented here rather than with <random> because
/// the standard distributions are not bit-reproducible across standard
/// library implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    /// Stream for run `run_index` under a master seed.
    static Rng for_run(std::uint64_t master_seed, std::uint64_t run_index);

    std::uint64_t next_u64();

    /// Uniform in [0, 1) with 53 random mantissa bits.
    double uniform01();

    bool bernoulli(double p);

    /// Index sampled from an unnormalized-tolerant probability vector
    /// (CDF scan; the last index absorbs rounding slack).
    int categorical(std::span<const double> probs);

    /// Standard normal via Box-Muller; consumes exactly two uniforms.
    double gaussian();

  private:
    std::uint64_t state_[4];
};

/// One SplitMix64 step: advances `state` and returns the next output.
std::uint64_t splitmix64_next(std::uint64_t& state);

}  // namespace unisoft
