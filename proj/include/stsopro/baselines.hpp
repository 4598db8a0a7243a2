#pragma once

#include <cstddef>
#include <span>

#include "stsopro/linalg.hpp"
#include "stsopro/loss.hpp"
#include "stsopro/optimizer.hpp"
#include "stsopro/topology.hpp"

namespace stsopro {

/// Symmetric doubly stochastic matrix supported on the graph plus diagonal.
class MixingMatrix {
 public:
  MixingMatrix(const Graph& graph, Matrix weights);

  const Matrix& matrix() const noexcept { return weights_; }
  std::size_t num_agents() const noexcept { return static_cast<std::size_t>(weights_.rows()); }
  const Graph& graph() const noexcept { return *graph_; }

  /// sum_j w_ij v_j over j in {i} u N_i (self first, then neighbours ascending).
  Vector mix(std::size_t agent, std::span<const Vector> v) const;

 private:
  const Graph* graph_;
  Matrix weights_;
};

/// w_ij = 1 / (1 + max(deg_i, deg_j)) on edges; the diagonal takes the rest.
/// The graph must outlive the returned matrix.
MixingMatrix metropolis_weights(const Graph& graph);

/// x_i <- sum_j w_ij x_j - step * g_i(x_i). d scalars per directed edge.
void dsgd_round(NetworkState& state, const MixingMatrix& mixing, double step,
                std::span<const LocalDataset> datasets, const RunConfig& config);

/// x_i <- sum_j w_ij x_j - step * t_i, then
/// t_i <- sum_j w_ij t_j + g_i(x_i^{k+1}) - g_i(x_i^k). 2d scalars per directed edge.
void dsgt_round(NetworkState& state, const MixingMatrix& mixing, double step,
                std::span<const LocalDataset> datasets, const RunConfig& config);

/// t_i^0 = g_i(x_i^0) from the round-0 gradient batch.
void dsgt_initialize(NetworkState& state, std::span<const LocalDataset> datasets,
                     const RunConfig& config);

/// Step size of round k under the configured schedule.
double baseline_step(const RunConfig& config, std::size_t round);

}  // namespace stsopro
