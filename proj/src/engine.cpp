#include "stsopro/engine.hpp"

#include "stsopro/errors.hpp"

namespace stsopro {

namespace {

std::vector<ProximalBlock> default_proximal(const WeightedLaplacian& topology,
                                            std::span<const LocalDataset> datasets,
                                            const RunConfig& config) {
  if (!is_second_order(config.algorithm)) return {};
  if (config.proximal == ProximalMode::explicit_blocks) {
    return explicit_D(config.explicit_blocks, topology.num_agents(), datasets.front().dim());
  }
  SpectralSummary spectra{0.0, 0.0};
  if (topology.num_agents() > 1) spectra = spectral_summary(topology.matrix());
  return choose_D(network_smoothness(datasets), config.beta, config.mu, spectra);
}

}  // namespace

Engine::Engine(const WeightedLaplacian& topology, std::span<const LocalDataset> datasets,
               RunConfig config)
    : Engine(topology, datasets, config, default_proximal(topology, datasets, config)) {}

Engine::Engine(const WeightedLaplacian& topology, std::span<const LocalDataset> datasets,
               RunConfig config, std::vector<ProximalBlock> proximal)
    : topology_(&topology), datasets_(datasets), config_(std::move(config)),
      proximal_(std::move(proximal)) {
  if (datasets_.size() != topology.num_agents()) {
    throw ParameterError(std::to_string(datasets_.size()) + " datasets for " +
                         std::to_string(topology.num_agents()) + " agents");
  }
  config_.validate(datasets_);
  if (is_second_order(config_.algorithm)) {
    if (proximal_.size() != topology.num_agents()) {
      throw ParameterError("need one proximal block per agent");
    }
  } else {
    mixing_.emplace(metropolis_weights(topology.graph()));
  }
}

NetworkState Engine::initial_state() const { return init_network(*topology_, datasets_, config_); }

void Engine::second_order_round(NetworkState& state) const {
  const std::size_t n = state.num_agents();
  const std::size_t k = state.round;
  const bool full = config_.algorithm == Algorithm::sopro;
  std::vector<Vector> next(n);
  for_each_agent(config_.execution, n, [&](std::size_t i) {
    const auto& ds = datasets_[i];
    const BatchIndices batches =
        full ? full_batches(ds.size())
             : sample_batches(config_.seed, i, k, ds.size(), config_.batch_g, config_.batch_s);
    next[i] = local_step(i, state.agents[i], ds, batches, proximal_[i], config_.beta);
  });
  // barrier: every agent has its x^{k+1} before anyone exchanges
  for (std::size_t i = 0; i < n; ++i) state.agents[i].x = std::move(next[i]);
  exchange_and_dual_update(state, *topology_, config_.beta, config_.execution);
  ++state.round;
}

void Engine::step(NetworkState& state) const {
  switch (config_.algorithm) {
    case Algorithm::st_sopro:
    case Algorithm::sopro:
      second_order_round(state);
      break;
    case Algorithm::dsgd:
      dsgd_round(state, *mixing_, baseline_step(config_, state.round), datasets_, config_);
      break;
    case Algorithm::dsgt:
      dsgt_round(state, *mixing_, baseline_step(config_, state.round), datasets_, config_);
      break;
  }
}

NetworkState Engine::run(const RoundCallback& callback) const {
  return run_from(initial_state(), callback);
}

NetworkState Engine::run_from(NetworkState state, const RoundCallback& callback) const {
  if (callback && !callback({state.round, state, state.comm_scalars})) return state;
  for (std::size_t k = 0; k < config_.max_iters; ++k) {
    step(state);
    if (callback && !callback({state.round, state, state.comm_scalars})) break;
  }
  return state;
}

NetworkState run(const WeightedLaplacian& topology, std::span<const LocalDataset> datasets,
                 const RunConfig& config, const RoundCallback& callback) {
  return Engine(topology, datasets, config).run(callback);
}

}  // namespace stsopro
