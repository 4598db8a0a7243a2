#include "stsopro/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "stsopro/baselines.hpp"
#include "stsopro/errors.hpp"

namespace stsopro {

std::string_view to_string(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::st_sopro: return "st_sopro";
    case Algorithm::sopro: return "sopro";
    case Algorithm::dsgd: return "dsgd";
    case Algorithm::dsgt: return "dsgt";
  }
  return "?";
}

std::string_view to_string(InitMode m) noexcept {
  return m == InitMode::uniform ? "uniform" : "zero";
}

std::string_view to_string(ProximalMode m) noexcept {
  return m == ProximalMode::alpha_identity ? "alpha_identity" : "explicit_blocks";
}

std::string_view to_string(StepSchedule s) noexcept {
  return s == StepSchedule::constant ? "constant" : "inverse";
}

Algorithm parse_algorithm(std::string_view text) {
  for (auto a : {Algorithm::st_sopro, Algorithm::sopro, Algorithm::dsgd, Algorithm::dsgt}) {
    if (to_string(a) == text) return a;
  }
  throw ParameterError("unknown algorithm \"" + std::string(text) + "\"");
}

InitMode parse_init_mode(std::string_view text) {
  if (text == "uniform") return InitMode::uniform;
  if (text == "zero") return InitMode::zero;
  throw ParameterError("unknown init mode \"" + std::string(text) + "\"");
}

ProximalMode parse_proximal_mode(std::string_view text) {
  if (text == "alpha_identity") return ProximalMode::alpha_identity;
  if (text == "explicit_blocks") return ProximalMode::explicit_blocks;
  throw ParameterError("unknown D mode \"" + std::string(text) + "\"");
}

StepSchedule parse_step_schedule(std::string_view text) {
  if (text == "constant") return StepSchedule::constant;
  if (text == "inverse") return StepSchedule::inverse;
  throw ParameterError("unknown step schedule \"" + std::string(text) + "\"");
}

bool is_second_order(Algorithm a) noexcept {
  return a == Algorithm::st_sopro || a == Algorithm::sopro;
}

ProximalBlock ProximalBlock::scaled_identity(double alpha) {
  if (!std::isfinite(alpha)) throw ParameterError("proximal alpha must be finite");
  ProximalBlock b;
  b.alpha_ = alpha;
  b.min_eig_ = alpha;
  b.max_eig_ = alpha;
  return b;
}

ProximalBlock ProximalBlock::dense(Matrix block) {
  if (block.rows() != block.cols() || block.rows() == 0) {
    throw ParameterError("proximal block must be square and nonempty");
  }
  if ((block - block.transpose()).norm() > 1e-12 * std::max(1.0, block.norm())) {
    throw ParameterError("proximal block must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(block, Eigen::EigenvaluesOnly);
  ProximalBlock b;
  b.min_eig_ = solver.eigenvalues()(0);
  b.max_eig_ = solver.eigenvalues()(solver.eigenvalues().size() - 1);
  b.block_ = std::move(block);
  return b;
}

double ProximalBlock::alpha() const {
  if (block_) throw ParameterError("dense proximal block has no scalar alpha");
  return alpha_;
}

const Matrix& ProximalBlock::block() const {
  if (!block_) throw ParameterError("scaled-identity proximal block has no dense form");
  return *block_;
}

void ProximalBlock::add_to(Matrix& system) const {
  if (block_) {
    system += *block_;
  } else {
    system.diagonal().array() += alpha_;
  }
}

Matrix ProximalBlock::as_matrix(std::size_t dim) const {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  add_to(m);
  return m;
}

void RunConfig::validate(std::span<const LocalDataset> datasets) const {
  if (datasets.empty()) throw ParameterError("no datasets");
  std::size_t smallest = datasets.front().size();
  for (const auto& ds : datasets) smallest = std::min(smallest, ds.size());
  if (is_second_order(algorithm)) {
    if (!(beta > 0.0)) throw ParameterError("beta must be positive");
    if (!(eta_s > 0.0 && eta_s < 1.0)) throw ParameterError("eta_s must lie in (0, 1)");
    if (proximal == ProximalMode::alpha_identity && !(mu > 0.0)) {
      throw ParameterError("mu must be positive");
    }
  } else if (!(step_size > 0.0)) {
    throw ParameterError("step size must be positive");
  }
  if (step_decay < 0.0) throw ParameterError("step decay must be nonnegative");
  if (algorithm != Algorithm::sopro) {
    if (batch_g < 1 || batch_g > smallest) {
      throw ParameterError("gradient batch size " + std::to_string(batch_g) +
                           " outside [1, " + std::to_string(smallest) + "]");
    }
  }
  if (algorithm == Algorithm::st_sopro && (batch_s < 1 || batch_s > smallest)) {
    throw ParameterError("Hessian batch size " + std::to_string(batch_s) + " outside [1, " +
                         std::to_string(smallest) + "]");
  }
  if (proximal == ProximalMode::explicit_blocks && explicit_blocks.size() != datasets.size()) {
    throw ParameterError("explicit D mode needs one block per agent");
  }
}

std::size_t NetworkState::dim() const noexcept {
  return agents.empty() ? 0 : static_cast<std::size_t>(agents.front().x.size());
}

Vector NetworkState::dual_sum() const {
  Vector s = Vector::Zero(static_cast<Eigen::Index>(dim()));
  for (const auto& a : agents) s += a.q;
  return s;
}

Vector NetworkState::average_x() const {
  Vector s = Vector::Zero(static_cast<Eigen::Index>(dim()));
  for (const auto& a : agents) s += a.x;
  return s / static_cast<double>(agents.size());
}

BatchIndices sample_batches(Rng& grad_stream, Rng& hess_stream, std::size_t C, std::size_t G,
                            std::size_t S) {
  if (G < 1 || G > C || S < 1 || S > C) {
    throw ParameterError("batch sizes (" + std::to_string(G) + ", " + std::to_string(S) +
                         ") outside [1, " + std::to_string(C) + "]");
  }
  return {sample_without_replacement(grad_stream, C, G),
          sample_without_replacement(hess_stream, C, S)};
}

BatchIndices sample_batches(std::uint64_t seed, std::size_t agent, std::size_t round,
                            std::size_t C, std::size_t G, std::size_t S) {
  Rng g = make_stream(seed, agent, round, StreamPurpose::grad_batch);
  Rng h = make_stream(seed, agent, round, StreamPurpose::hess_batch);
  return sample_batches(g, h, C, G, S);
}

BatchIndices full_batches(std::size_t C) {
  std::vector<std::size_t> all(C);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return {all, all};
}

namespace {

std::uint64_t directed_edge_scalars(const WeightedLaplacian& topology, std::size_t dim) {
  return 2ULL * topology.graph().num_edges() * dim;
}

std::vector<Vector> initial_primal(std::span<const LocalDataset> datasets,
                                   const RunConfig& config) {
  const std::size_t d = datasets.front().dim();
  std::vector<Vector> x0;
  x0.reserve(datasets.size());
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    Vector x = Vector::Zero(static_cast<Eigen::Index>(d));
    if (config.init == InitMode::uniform) {
      Rng rng = make_stream(config.seed, i, 0, StreamPurpose::init);
      std::uniform_real_distribution<double> unit(-1.0, 1.0);
      for (auto& v : x) v = unit(rng);
    }
    x0.push_back(std::move(x));
  }
  return x0;
}

}  // namespace

NetworkState init_network_at(const WeightedLaplacian& topology, std::vector<Vector> x0,
                             std::vector<Vector> q0) {
  const std::size_t n = topology.num_agents();
  if (x0.size() != n || q0.size() != n) {
    throw ParameterError("initial state has " + std::to_string(x0.size()) + " blocks for " +
                         std::to_string(n) + " agents");
  }
  NetworkState state;
  state.agents.resize(n);
  const auto dim = x0.empty() ? 0 : x0[0].size();
  for (std::size_t i = 0; i < n; ++i) {
    if (x0[i].size() != dim || q0[i].size() != dim) {
      throw ParameterError("initial blocks disagree in dimension");
    }
    state.agents[i].x = std::move(x0[i]);
    state.agents[i].q = std::move(q0[i]);
  }
  std::vector<Vector> xs;
  xs.reserve(n);
  for (const auto& a : state.agents) xs.push_back(a.x);
  for (std::size_t i = 0; i < n; ++i) state.agents[i].y = topology.weighted_disagreement(i, xs);
  state.comm_scalars = directed_edge_scalars(topology, state.dim());
  return state;
}

NetworkState init_network(const WeightedLaplacian& topology, std::span<const LocalDataset> datasets,
                          const RunConfig& config) {
  if (datasets.size() != topology.num_agents()) {
    throw ParameterError(std::to_string(datasets.size()) + " datasets for " +
                         std::to_string(topology.num_agents()) + " agents");
  }
  config.validate(datasets);
  auto x0 = initial_primal(datasets, config);
  if (is_second_order(config.algorithm)) {
    std::vector<Vector> q0(x0.size(), Vector::Zero(x0.front().size()));
    return init_network_at(topology, std::move(x0), std::move(q0));
  }
  NetworkState state;
  state.agents.resize(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) state.agents[i].x = std::move(x0[i]);
  if (config.algorithm == Algorithm::dsgt) dsgt_initialize(state, datasets, config);
  return state;
}

Vector solve_spd(const Matrix& system, const Vector& rhs, std::size_t agent) {
  Eigen::LLT<Matrix> llt(system);
  if (llt.info() != Eigen::Success) {
    throw ConfigurationError("agent " + std::to_string(agent) +
                             ": h_i + D_i is not positive definite (check condition on D)");
  }
  return llt.solve(rhs);
}

Vector local_step(std::size_t agent, const AgentState& state, const LocalDataset& ds,
                  const BatchIndices& batches, const ProximalBlock& D, double beta) {
  const Vector g = batch_grad(state.x, ds, batches.grad);
  Matrix system = batch_hess(state.x, ds, batches.hess).dense();
  D.add_to(system);
  const Vector rhs = g + beta * state.y + state.q;
  return state.x - solve_spd(system, rhs, agent);
}

void exchange_and_dual_update(NetworkState& state, const WeightedLaplacian& topology, double beta,
                              ExecutionPolicy policy) {
  const std::size_t n = state.num_agents();
  std::vector<Vector> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = state.agents[i].x;
  for_each_agent(policy, n, [&](std::size_t i) {
    auto& a = state.agents[i];
    a.y = topology.weighted_disagreement(i, xs);
    a.q += beta * a.y;
  });
  state.comm_scalars += directed_edge_scalars(topology, state.dim());
}

double recipe_mu_lower_bound(const SmoothnessBounds& bounds, double eta_s, double c0) {
  if (!(eta_s > 0.0 && eta_s < 1.0)) throw ParameterError("eta_s must lie in (0, 1)");
  if (!(c0 > 0.0)) throw ParameterError("c0 must be positive");
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < bounds.num_agents(); ++i) {
    const double m = bounds.m[i];
    const double M = bounds.M[i];
    worst = std::max(worst, 0.5 * (M - 3.0 * m) + M / (2.0 * (1.0 - eta_s)) +
                                (M - m) * (M - m) / (4.0 * c0));
  }
  return worst;
}

std::vector<ProximalBlock> choose_D(const SmoothnessBounds& bounds, double beta, double mu,
                                    const SpectralSummary& spectra,
                                    std::optional<RecipeCheck> check) {
  if (!(beta > 0.0)) throw ParameterError("beta must be positive");
  if (check) {
    const double bound = recipe_mu_lower_bound(bounds, check->eta_s, check->c0);
    if (!(mu > bound)) {
      throw ConfigurationError("mu = " + std::to_string(mu) + " does not exceed its lower bound " +
                               std::to_string(bound) + " = max_i (M_i-3m_i)/2 + M_i/(2(1-eta_s))" +
                               " + (M_i-m_i)^2/(4 c0)");
    }
  }
  const double alpha = (0.5 + spectra.lambda_max) * beta + mu;
  return std::vector<ProximalBlock>(bounds.num_agents(), ProximalBlock::scaled_identity(alpha));
}

std::vector<ProximalBlock> explicit_D(const std::vector<Matrix>& blocks, std::size_t num_agents,
                                      std::size_t dim) {
  if (blocks.size() != num_agents) {
    throw ParameterError("expected " + std::to_string(num_agents) + " proximal blocks");
  }
  std::vector<ProximalBlock> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) {
    if (static_cast<std::size_t>(b.rows()) != dim) {
      throw ParameterError("proximal block dimension does not match the problem");
    }
    out.push_back(ProximalBlock::dense(b));
  }
  return out;
}

}  // namespace stsopro
