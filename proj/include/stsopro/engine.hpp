#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "stsopro/baselines.hpp"
#include "stsopro/loss.hpp"
#include "stsopro/optimizer.hpp"
#include "stsopro/topology.hpp"

namespace stsopro {

/// What a per-round observer sees. `state` is read-only and valid only for
/// the duration of the call.
struct RoundView {
  std::size_t round;
  const NetworkState& state;
  std::uint64_t comm_scalars;
};

/// Return false to stop the run after this round.
using RoundCallback = std::function<bool(const RoundView&)>;

/// Synchronous round engine for all four algorithms.
///
/// Topology and datasets are borrowed and must outlive the engine. Results
/// are identical under serial and parallel execution: every random draw comes
/// from a (seed, agent, round, purpose) substream.
class Engine {
 public:
  /// D from the alpha-identity recipe (unchecked) or from config.explicit_blocks.
  Engine(const WeightedLaplacian& topology, std::span<const LocalDataset> datasets,
         RunConfig config);
  Engine(const WeightedLaplacian& topology, std::span<const LocalDataset> datasets,
         RunConfig config, std::vector<ProximalBlock> proximal);

  const RunConfig& config() const noexcept { return config_; }
  const std::vector<ProximalBlock>& proximal_blocks() const noexcept { return proximal_; }

  NetworkState initial_state() const;

  /// One round k -> k+1.
  void step(NetworkState& state) const;

  /// Calls back at round 0 and after every round up to config.max_iters.
  NetworkState run(const RoundCallback& callback = {}) const;
  NetworkState run_from(NetworkState state, const RoundCallback& callback = {}) const;

 private:
  void second_order_round(NetworkState& state) const;

  const WeightedLaplacian* topology_;
  std::span<const LocalDataset> datasets_;
  RunConfig config_;
  std::vector<ProximalBlock> proximal_;
  std::optional<MixingMatrix> mixing_;
};

/// Engine(topology, datasets, config).run(callback)
NetworkState run(const WeightedLaplacian& topology, std::span<const LocalDataset> datasets,
                 const RunConfig& config, const RoundCallback& callback = {});

}  // namespace stsopro
