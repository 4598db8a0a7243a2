#include "stsopro/topology.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "stsopro/errors.hpp"
#include "stsopro/rng.hpp"

namespace stsopro {

namespace {

bool bfs_connected(std::size_t n, const std::vector<std::vector<std::size_t>>& adjacency) {
  if (n == 0) return false;
  std::vector<bool> seen(n, false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t visited = 1;
  while (!frontier.empty()) {
    const std::size_t u = frontier.front();
    frontier.pop();
    for (std::size_t v : adjacency[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++visited;
        frontier.push(v);
      }
    }
  }
  return visited == n;
}

// Decodes a Pruefer sequence of length n-2 into the n-1 edges of its tree.
std::vector<EdgeKey> pruefer_tree(std::size_t n, const std::vector<std::size_t>& code) {
  std::vector<std::size_t> degree(n, 1);
  for (std::size_t c : code) ++degree[c];
  std::set<std::size_t> leaves;
  for (std::size_t v = 0; v < n; ++v) {
    if (degree[v] == 1) leaves.insert(v);
  }
  std::vector<EdgeKey> edges;
  edges.reserve(n - 1);
  for (std::size_t c : code) {
    const std::size_t leaf = *leaves.begin();
    leaves.erase(leaves.begin());
    edges.emplace_back(leaf, c);
    if (--degree[c] == 1) leaves.insert(c);
  }
  const std::size_t u = *leaves.begin();
  const std::size_t v = *std::next(leaves.begin());
  edges.emplace_back(u, v);
  return edges;
}

}  // namespace

Graph::Graph(std::size_t num_agents, std::vector<EdgeKey> edges)
    : num_agents_(num_agents), adjacency_(num_agents) {
  if (num_agents == 0) throw ParameterError("graph needs at least one agent");
  for (auto& [i, j] : edges) {
    if (i >= num_agents || j >= num_agents) {
      throw ParameterError("edge {" + std::to_string(i) + "," + std::to_string(j) +
                           "} references an agent outside [0," + std::to_string(num_agents) +
                           ")");
    }
    if (i == j) throw ParameterError("self-loop at agent " + std::to_string(i));
    if (i > j) std::swap(i, j);
  }
  std::sort(edges.begin(), edges.end());
  if (auto dup = std::adjacent_find(edges.begin(), edges.end()); dup != edges.end()) {
    throw ParameterError("duplicate edge {" + std::to_string(dup->first) + "," +
                         std::to_string(dup->second) + "}");
  }
  for (const auto& [i, j] : edges) {
    adjacency_[i].push_back(j);
    adjacency_[j].push_back(i);
  }
  for (auto& list : adjacency_) std::sort(list.begin(), list.end());
  if (!bfs_connected(num_agents, adjacency_)) throw ParameterError("graph is not connected");
  edges_ = std::move(edges);
}

bool Graph::has_edge(std::size_t i, std::size_t j) const {
  if (i >= num_agents_ || j >= num_agents_) return false;
  const auto& list = adjacency_[i];
  return std::binary_search(list.begin(), list.end(), j);
}

double Graph::average_degree() const noexcept {
  return 2.0 * static_cast<double>(edges_.size()) / static_cast<double>(num_agents_);
}

Graph build_random_connected_graph(std::size_t n, double target_avg_degree, std::uint64_t seed) {
  if (n < 2) throw ParameterError("random graph needs n >= 2");
  if (!std::isfinite(target_avg_degree) || target_avg_degree <= 0.0) {
    throw ParameterError("average degree must be positive");
  }
  const double max_edges = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  const double wanted = std::ceil(0.5 * static_cast<double>(n) * target_avg_degree - 1e-9);
  if (wanted > max_edges) {
    throw ParameterError("average degree " + std::to_string(target_avg_degree) +
                         " is infeasible for " + std::to_string(n) + " agents");
  }
  const double tree_degree = 2.0 * static_cast<double>(n - 1) / static_cast<double>(n);
  if (target_avg_degree < tree_degree - 1.0) {
    throw ParameterError("average degree " + std::to_string(target_avg_degree) +
                         " is below what a connected graph on " + std::to_string(n) +
                         " agents can have");
  }
  const auto edge_count = std::max<std::size_t>(n - 1, static_cast<std::size_t>(wanted));

  Rng rng = make_stream(seed, 0, 0, StreamPurpose::topology);
  std::vector<EdgeKey> edges;
  if (n == 2) {
    edges.emplace_back(0, 1);
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> code(n - 2);
    for (auto& c : code) c = pick(rng);
    edges = pruefer_tree(n, code);
  }
  for (auto& [i, j] : edges) {
    if (i > j) std::swap(i, j);
  }

  std::set<EdgeKey> present(edges.begin(), edges.end());
  std::vector<EdgeKey> absent;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!present.count({i, j})) absent.emplace_back(i, j);
    }
  }
  const std::size_t extra = edge_count - edges.size();
  auto chosen = sample_without_replacement(rng, absent.size(), extra);
  std::shuffle(chosen.begin(), chosen.end(), rng);
  for (std::size_t k : chosen) edges.push_back(absent[k]);
  return Graph(n, std::move(edges));
}

WeightedLaplacian::WeightedLaplacian(Graph graph, std::vector<double> edge_weights)
    : graph_(std::move(graph)), edge_weights_(std::move(edge_weights)) {
  const std::size_t n = graph_.num_agents();
  if (edge_weights_.size() != graph_.num_edges()) {
    throw ParameterError("expected " + std::to_string(graph_.num_edges()) + " edge weights, got " +
                         std::to_string(edge_weights_.size()));
  }
  matrix_ = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::map<EdgeKey, double> lookup;
  for (std::size_t e = 0; e < graph_.num_edges(); ++e) {
    const double p = edge_weights_[e];
    const auto [i, j] = graph_.edges()[e];
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw ParameterError("edge {" + std::to_string(i) + "," + std::to_string(j) +
                           "} has nonpositive weight " + std::to_string(p));
    }
    const auto a = static_cast<Eigen::Index>(i);
    const auto b = static_cast<Eigen::Index>(j);
    matrix_(a, a) += p;
    matrix_(b, b) += p;
    matrix_(a, b) -= p;
    matrix_(b, a) -= p;
    lookup[{i, j}] = p;
  }
  neighbor_weights_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : graph_.neighbors(i)) {
      neighbor_weights_[i].push_back(lookup.at({std::min(i, j), std::max(i, j)}));
    }
  }
}

Vector WeightedLaplacian::weighted_disagreement(std::size_t agent, std::span<const Vector> x) const {
  const auto neighbors = graph_.neighbors(agent);
  const auto weights = neighbor_weights_[agent];
  Vector y = Vector::Zero(x[agent].size());
  for (std::size_t k = 0; k < neighbors.size(); ++k) {
    y.noalias() += weights[k] * (x[agent] - x[neighbors[k]]);
  }
  return y;
}

std::vector<Vector> WeightedLaplacian::apply(std::span<const Vector> x) const {
  if (x.size() != num_agents()) throw ParameterError("block count does not match agent count");
  std::vector<Vector> out;
  out.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out.push_back(weighted_disagreement(i, x));
  return out;
}

WeightedLaplacian laplacian_weights(const Graph& graph, double uniform_weight) {
  return WeightedLaplacian(graph, std::vector<double>(graph.num_edges(), uniform_weight));
}

WeightedLaplacian laplacian_weights(const Graph& graph, const std::map<EdgeKey, double>& weights) {
  std::vector<double> aligned;
  aligned.reserve(graph.num_edges());
  for (const auto& [i, j] : graph.edges()) {
    auto it = weights.find({i, j});
    if (it == weights.end()) it = weights.find({j, i});
    if (it == weights.end()) {
      throw ParameterError("no weight given for edge {" + std::to_string(i) + "," +
                           std::to_string(j) + "}");
    }
    aligned.push_back(it->second);
  }
  return WeightedLaplacian(graph, std::move(aligned));
}

SpectralSummary spectral_summary(const Matrix& P) {
  if (P.rows() != P.cols() || P.rows() < 2) {
    throw InvariantError("P must be square with at least two agents");
  }
  const double scale = std::max(P.norm(), std::numeric_limits<double>::min());
  if ((P - P.transpose()).norm() > 1e-12 * scale) throw InvariantError("P is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(P, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw InvariantError("eigensolver failed on P");
  const Vector& ev = solver.eigenvalues();  // ascending
  const double lambda_max = ev(ev.size() - 1);
  const double zero_tol = 1e-10 * std::max(lambda_max, 0.0);
  if (ev(0) < -zero_tol || lambda_max <= 0.0) {
    throw InvariantError("P is indefinite (smallest eigenvalue " + std::to_string(ev(0)) + ")");
  }
  if (ev(1) <= zero_tol) {
    throw InvariantError("P has a repeated zero eigenvalue; graph is not connected");
  }
  return {ev(1), lambda_max};
}

void write_edge_list(std::ostream& out, const WeightedLaplacian& laplacian) {
  const auto& g = laplacian.graph();
  out << g.num_agents() << ' ' << g.num_edges() << '\n';
  out << std::setprecision(17);
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    out << g.edges()[e].first << ' ' << g.edges()[e].second << ' ' << laplacian.edge_weights()[e]
        << '\n';
  }
}

WeightedLaplacian read_edge_list(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  if (!next_line()) throw ParseError(line_no, "missing header \"n m\"");
  std::size_t n = 0;
  std::size_t m = 0;
  {
    std::istringstream header(line);
    if (!(header >> n >> m)) throw ParseError(line_no, "malformed header \"" + line + "\"");
  }
  std::vector<EdgeKey> edges;
  std::map<EdgeKey, double> weights;
  for (std::size_t e = 0; e < m; ++e) {
    if (!next_line()) throw ParseError(line_no, "expected " + std::to_string(m) + " edges");
    std::istringstream row(line);
    std::size_t i = 0;
    std::size_t j = 0;
    double p = 0.0;
    std::string trailing;
    if (!(row >> i >> j >> p) || (row >> trailing)) {
      throw ParseError(line_no, "malformed edge \"" + line + "\"");
    }
    edges.emplace_back(i, j);
    weights[{std::min(i, j), std::max(i, j)}] = p;
  }
  try {
    Graph g(n, std::move(edges));
    return laplacian_weights(g, weights);
  } catch (const ParameterError& e) {
    throw ParseError(line_no, e.what());
  }
}

}  // namespace stsopro
