#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace stsopro {

using Rng = std::mt19937_64;

/// Tags that keep independent random streams apart.
enum class StreamPurpose : std::uint64_t {
  init = 1,
  grad_batch = 2,
  hess_batch = 3,
  topology = 4,
  partition = 5,
  data = 6,
  seed_split = 7,
};

/// SplitMix64 finaliser applied to `a` combined with `b`.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

/// Seed for the stream owned by (agent, round, purpose) under a master seed.
/// Streams never depend on the order in which agents are scheduled.
std::uint64_t substream_seed(std::uint64_t master, std::uint64_t agent, std::uint64_t round,
                             StreamPurpose purpose) noexcept;

Rng make_stream(std::uint64_t master, std::uint64_t agent, std::uint64_t round,
                StreamPurpose purpose);

/// k distinct indices drawn uniformly from {0, ..., population-1}, returned sorted.
std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t population,
                                                    std::size_t k);

}  // namespace stsopro
