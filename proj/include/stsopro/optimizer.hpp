#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stsopro/linalg.hpp"
#include "stsopro/loss.hpp"
#include "stsopro/parallel.hpp"
#include "stsopro/rng.hpp"
#include "stsopro/topology.hpp"

namespace stsopro {

enum class Algorithm { st_sopro, sopro, dsgd, dsgt };
enum class InitMode { uniform, zero };
enum class ProximalMode { alpha_identity, explicit_blocks };
enum class StepSchedule { constant, inverse };

std::string_view to_string(Algorithm a) noexcept;
std::string_view to_string(InitMode m) noexcept;
std::string_view to_string(ProximalMode m) noexcept;
std::string_view to_string(StepSchedule s) noexcept;
Algorithm parse_algorithm(std::string_view text);
InitMode parse_init_mode(std::string_view text);
ProximalMode parse_proximal_mode(std::string_view text);
StepSchedule parse_step_schedule(std::string_view text);

bool is_second_order(Algorithm a) noexcept;

/// One agent's proximal block D_i: alpha * I (stored as the scalar) or a
/// dense symmetric d x d matrix.
class ProximalBlock {
 public:
  static ProximalBlock scaled_identity(double alpha);
  /// Throws ParameterError unless `block` is square and symmetric.
  static ProximalBlock dense(Matrix block);

  bool is_scaled_identity() const noexcept { return !block_.has_value(); }
  double alpha() const;
  const Matrix& block() const;
  double min_eigenvalue() const noexcept { return min_eig_; }
  double max_eigenvalue() const noexcept { return max_eig_; }

  /// system += D_i
  void add_to(Matrix& system) const;
  Matrix as_matrix(std::size_t dim) const;

 private:
  ProximalBlock() = default;
  double alpha_ = 0.0;
  std::optional<Matrix> block_;
  double min_eig_ = 0.0;
  double max_eig_ = 0.0;
};

struct RunConfig {
  Algorithm algorithm = Algorithm::st_sopro;
  double beta = 1.0;
  double eta_s = 0.5;
  double mu = 1.0;
  std::size_t batch_g = 1;
  std::size_t batch_s = 1;
  std::size_t max_iters = 100;
  std::uint64_t seed = 0;
  InitMode init = InitMode::uniform;
  ProximalMode proximal = ProximalMode::alpha_identity;
  std::vector<Matrix> explicit_blocks;  // one per agent when proximal == explicit_blocks

  // first-order baselines
  double step_size = 0.1;
  StepSchedule schedule = StepSchedule::constant;
  double step_decay = 0.0;  // alpha_k = step_size / (1 + step_decay * k) under `inverse`

  ExecutionPolicy execution = ExecutionPolicy::parallel;

  /// Throws ParameterError when a field is out of range for these datasets.
  void validate(std::span<const LocalDataset> datasets) const;
};

/// Per-agent iterate. `tracker` and `last_grad` are only populated for DSGT.
struct AgentState {
  Vector x;
  Vector q;
  Vector y;
  Vector tracker;
  Vector last_grad;
};

struct NetworkState {
  std::vector<AgentState> agents;
  std::size_t round = 0;
  std::uint64_t comm_scalars = 0;

  std::size_t num_agents() const noexcept { return agents.size(); }
  std::size_t dim() const noexcept;
  Vector dual_sum() const;
  Vector average_x() const;
};

struct BatchIndices {
  std::vector<std::size_t> grad;
  std::vector<std::size_t> hess;
};

/// Two independent uniform draws without replacement, sorted.
BatchIndices sample_batches(Rng& grad_stream, Rng& hess_stream, std::size_t C, std::size_t G,
                            std::size_t S);
/// Same, with the streams owned by (seed, agent, round).
BatchIndices sample_batches(std::uint64_t seed, std::size_t agent, std::size_t round,
                            std::size_t C, std::size_t G, std::size_t S);
BatchIndices full_batches(std::size_t C);

/// Algorithm-specific round-0 state. For the second-order methods: q^0 = 0,
/// x^0 from the init stream (or zero), y^0 = W x^0 and the initial exchange
/// counted in comm_scalars. DSGT trackers start at the round-0 stochastic
/// gradient.
NetworkState init_network(const WeightedLaplacian& topology, std::span<const LocalDataset> datasets,
                          const RunConfig& config);

/// Second-order state from explicit x^0, q^0 (y^0 = W x^0, init exchange counted).
NetworkState init_network_at(const WeightedLaplacian& topology, std::vector<Vector> x0,
                             std::vector<Vector> q0);

/// Cholesky solve of (system) * delta = rhs. Throws ConfigurationError naming
/// `agent` when the system is not positive definite.
Vector solve_spd(const Matrix& system, const Vector& rhs, std::size_t agent);

/// x_i - (h_i(x_i) + D_i)^{-1} (g_i(x_i) + beta y_i + q_i)
Vector local_step(std::size_t agent, const AgentState& state, const LocalDataset& ds,
                  const BatchIndices& batches, const ProximalBlock& D, double beta);

/// Barrier phase: y_i = sum_j p_ij (x_i - x_j), q_i += beta y_i, and d scalars
/// counted per directed edge.
void exchange_and_dual_update(NetworkState& state, const WeightedLaplacian& topology, double beta,
                              ExecutionPolicy policy = ExecutionPolicy::serial);

/// Parameters for validating mu against the D = alpha I recipe.
struct RecipeCheck {
  double eta_s;
  double c0;
};

/// max_i (M_i - 3 m_i)/2 + M_i/(2(1 - eta_s)) + (M_i - m_i)^2/(4 c0)
double recipe_mu_lower_bound(const SmoothnessBounds& bounds, double eta_s, double c0);

/// D_i = alpha I with alpha = (1/2 + lambda_max) beta + mu. With a check, mu
/// must exceed recipe_mu_lower_bound or a ConfigurationError is thrown.
std::vector<ProximalBlock> choose_D(const SmoothnessBounds& bounds, double beta, double mu,
                                    const SpectralSummary& spectra,
                                    std::optional<RecipeCheck> check = std::nullopt);

/// Validates explicit blocks (one per agent, d x d, symmetric).
std::vector<ProximalBlock> explicit_D(const std::vector<Matrix>& blocks, std::size_t num_agents,
                                      std::size_t dim);

}  // namespace stsopro
