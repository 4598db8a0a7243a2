#include "stsopro/rng.hpp"

#include <algorithm>
#include <numeric>

#include "stsopro/errors.hpp"

namespace stsopro {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t substream_seed(std::uint64_t master, std::uint64_t agent, std::uint64_t round,
                             StreamPurpose purpose) noexcept {
  std::uint64_t s = mix_seed(master, static_cast<std::uint64_t>(purpose));
  s = mix_seed(s, agent);
  return mix_seed(s, round);
}

Rng make_stream(std::uint64_t master, std::uint64_t agent, std::uint64_t round,
                StreamPurpose purpose) {
  return Rng(substream_seed(master, agent, round, purpose));
}

std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t population,
                                                    std::size_t k) {
  if (k > population) {
    throw ParameterError("cannot draw " + std::to_string(k) + " distinct indices from " +
                         std::to_string(population));
  }
  std::vector<std::size_t> pool(population);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  // partial Fisher-Yates
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace stsopro
