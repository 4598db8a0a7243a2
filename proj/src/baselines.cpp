#include "stsopro/baselines.hpp"

#include <algorithm>

#include "stsopro/errors.hpp"

namespace stsopro {

MixingMatrix::MixingMatrix(const Graph& graph, Matrix weights)
    : graph_(&graph), weights_(std::move(weights)) {
  const auto n = static_cast<Eigen::Index>(graph.num_agents());
  if (weights_.rows() != n || weights_.cols() != n) {
    throw ParameterError("mixing matrix size does not match the graph");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && weights_(i, j) != 0.0 &&
          !graph.has_edge(static_cast<std::size_t>(i), static_cast<std::size_t>(j))) {
        throw ParameterError("mixing weight outside the graph's sparsity pattern");
      }
    }
  }
}

Vector MixingMatrix::mix(std::size_t agent, std::span<const Vector> v) const {
  const auto i = static_cast<Eigen::Index>(agent);
  Vector out = weights_(i, i) * v[agent];
  for (std::size_t j : graph_->neighbors(agent)) {
    out.noalias() += weights_(i, static_cast<Eigen::Index>(j)) * v[j];
  }
  return out;
}

MixingMatrix metropolis_weights(const Graph& graph) {
  const std::size_t n = graph.num_agents();
  Matrix w = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (const auto& [i, j] : graph.edges()) {
    const double wij = 1.0 / (1.0 + static_cast<double>(std::max(graph.degree(i), graph.degree(j))));
    w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = wij;
    w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = wij;
  }
  for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, i) = 1.0 - w.row(i).sum();
  return MixingMatrix(graph, std::move(w));
}

double baseline_step(const RunConfig& config, std::size_t round) {
  if (config.schedule == StepSchedule::constant) return config.step_size;
  return config.step_size / (1.0 + config.step_decay * static_cast<double>(round));
}

namespace {

Vector sampled_grad(const Vector& x, const LocalDataset& ds, const RunConfig& config,
                    std::size_t agent, std::size_t round) {
  Rng rng = make_stream(config.seed, agent, round, StreamPurpose::grad_batch);
  const auto idx = sample_without_replacement(rng, ds.size(), config.batch_g);
  return batch_grad(x, ds, idx);
}

std::vector<Vector> snapshot(const NetworkState& state, Vector AgentState::*field) {
  std::vector<Vector> out(state.num_agents());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = state.agents[i].*field;
  return out;
}

std::uint64_t directed_edge_scalars(const MixingMatrix& mixing, std::size_t dim) {
  return 2ULL * mixing.graph().num_edges() * dim;
}

}  // namespace

void dsgd_round(NetworkState& state, const MixingMatrix& mixing, double step,
                std::span<const LocalDataset> datasets, const RunConfig& config) {
  const std::size_t n = state.num_agents();
  const std::size_t k = state.round;
  const auto xs = snapshot(state, &AgentState::x);
  for_each_agent(config.execution, n, [&](std::size_t i) {
    state.agents[i].x = mixing.mix(i, xs) - step * sampled_grad(xs[i], datasets[i], config, i, k);
  });
  state.comm_scalars += directed_edge_scalars(mixing, state.dim());
  ++state.round;
}

void dsgt_initialize(NetworkState& state, std::span<const LocalDataset> datasets,
                     const RunConfig& config) {
  for_each_agent(config.execution, state.num_agents(), [&](std::size_t i) {
    auto& a = state.agents[i];
    a.last_grad = sampled_grad(a.x, datasets[i], config, i, 0);
    a.tracker = a.last_grad;
  });
}

void dsgt_round(NetworkState& state, const MixingMatrix& mixing, double step,
                std::span<const LocalDataset> datasets, const RunConfig& config) {
  const std::size_t n = state.num_agents();
  const std::size_t next_round = state.round + 1;
  const auto xs = snapshot(state, &AgentState::x);
  const auto ts = snapshot(state, &AgentState::tracker);
  for_each_agent(config.execution, n, [&](std::size_t i) {
    auto& a = state.agents[i];
    a.x = mixing.mix(i, xs) - step * ts[i];
    Vector fresh = sampled_grad(a.x, datasets[i], config, i, next_round);
    a.tracker = mixing.mix(i, ts) + fresh - a.last_grad;
    a.last_grad = std::move(fresh);
  });
  state.comm_scalars += 2 * directed_edge_scalars(mixing, state.dim());
  state.round = next_round;
}

}  // namespace stsopro
