#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "stsopro/linalg.hpp"

namespace stsopro {

using EdgeKey = std::pair<std::size_t, std::size_t>;

/// Connected undirected graph without self-loops or duplicate edges.
///
/// Edges are stored normalised (i < j) and sorted; neighbour lists are sorted
/// and symmetric.
class Graph {
 public:
  /// Throws ParameterError on self-loops, duplicates, out-of-range endpoints or
  /// a disconnected edge set.
  Graph(std::size_t num_agents, std::vector<EdgeKey> edges);

  std::size_t num_agents() const noexcept { return num_agents_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  const std::vector<EdgeKey>& edges() const noexcept { return edges_; }
  std::span<const std::size_t> neighbors(std::size_t agent) const { return adjacency_.at(agent); }
  std::size_t degree(std::size_t agent) const { return adjacency_.at(agent).size(); }
  bool has_edge(std::size_t i, std::size_t j) const;
  double average_degree() const noexcept;

 private:
  std::size_t num_agents_;
  std::vector<EdgeKey> edges_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

/// Uniform random labelled spanning tree (random Pruefer code) plus uniformly
/// chosen extra edges until the edge count is ceil(n * avg_degree / 2).
Graph build_random_connected_graph(std::size_t n, double target_avg_degree, std::uint64_t seed);

/// The graph together with positive symmetric edge weights p_ij and the dense
/// matrix P built from them ([P]_ii = sum_s p_is, [P]_ij = -p_ij on edges).
///
/// W = P (x) I_d is never formed; products with W go through
/// weighted_disagreement(), which is what each agent computes from messages.
class WeightedLaplacian {
 public:
  /// `edge_weights` is aligned with graph.edges().
  WeightedLaplacian(Graph graph, std::vector<double> edge_weights);

  const Graph& graph() const noexcept { return graph_; }
  std::size_t num_agents() const noexcept { return graph_.num_agents(); }
  const Matrix& matrix() const noexcept { return matrix_; }
  const std::vector<double>& edge_weights() const noexcept { return edge_weights_; }
  std::span<const double> neighbor_weights(std::size_t agent) const {
    return neighbor_weights_.at(agent);
  }

  /// sum_{j in N_i} p_ij (x_i - x_j): the i-th block of W x.
  Vector weighted_disagreement(std::size_t agent, std::span<const Vector> x) const;

  /// All blocks of W x.
  std::vector<Vector> apply(std::span<const Vector> x) const;

 private:
  Graph graph_;
  std::vector<double> edge_weights_;
  std::vector<std::vector<double>> neighbor_weights_;
  Matrix matrix_;
};

WeightedLaplacian laplacian_weights(const Graph& graph, double uniform_weight = 1.0);
WeightedLaplacian laplacian_weights(const Graph& graph, const std::map<EdgeKey, double>& weights);

struct SpectralSummary {
  double lambda_W = 0.0;    // smallest nonzero eigenvalue of P (and of W)
  double lambda_max = 0.0;  // largest eigenvalue of P
};

/// Symmetric eigen-decomposition of P. Throws InvariantError unless P is
/// symmetric, positive semidefinite and has a simple zero eigenvalue.
SpectralSummary spectral_summary(const Matrix& P);

/// Edge-list text: "n m" then m lines "i j p_ij", 0-based.
void write_edge_list(std::ostream& out, const WeightedLaplacian& laplacian);
WeightedLaplacian read_edge_list(std::istream& in);

}  // namespace stsopro
