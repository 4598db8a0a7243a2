#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stsopro/certificate.hpp"
#include "stsopro/config.hpp"
#include "stsopro/engine.hpp"
#include "stsopro/loss.hpp"
#include "stsopro/optimizer.hpp"
#include "stsopro/topology.hpp"

namespace stsopro {

/// Loads the LIBSVM file or generates the configured synthetic set.
LabeledData load_dataset(const ExperimentConfig& config);

/// Centralised damped Newton on sum_i f_i, stopped at ||grad|| <= tol.
/// Throws ConfigurationError when the iteration cap is hit first.
Vector solve_reference(std::span<const LocalDataset> datasets, double tol = 1e-12,
                       std::size_t max_iters = 200);

/// solve_reference memoised on a fingerprint of the samples and lambda.
Vector solve_reference_cached(std::span<const LocalDataset> datasets, double tol = 1e-12);

/// (1/N) sum_i ||x_i - x*||^2
double optimality_error(const NetworkState& state, const Vector& x_star);

/// Fraction of samples with sign(a^T x) == b, ties predicting +1. NaN when empty.
double accuracy(const Vector& x, std::span<const Sample> test);

/// Points at which sigma^2 is probed: 0, x* and the iterates of a short
/// gradient-descent path on sum_i f_i started at 0.
std::vector<Vector> sigma_probes(std::span<const LocalDataset> datasets, const Vector& x_star);

/// Everything fixed by problem_seed: data split, topology and derived bounds.
struct Problem {
  std::vector<LocalDataset> agents;
  std::vector<Sample> test;
  std::optional<WeightedLaplacian> topology;
  SpectralSummary spectra;
  SmoothnessBounds bounds;
  Vector x_star;
  double sigma_sq = 0.0;
  std::size_t dim = 0;

  const WeightedLaplacian& laplacian() const { return *topology; }
  std::size_t num_agents() const noexcept { return agents.size(); }
};

Problem build_problem(const ExperimentConfig& config);

/// Certificate inputs for the configured second-order run (D from the
/// alpha-identity recipe, tau from the batch size, m_fbar = N lambda).
CertificateInputs certificate_inputs(const Problem& problem, const ExperimentConfig& config);

struct MetricsRecord {
  std::size_t round = 0;
  double opt_error = 0.0;
  std::optional<double> q_error;
  std::uint64_t comm_scalars = 0;
  std::uint64_t comm_bits = 0;  // 32 * comm_scalars
  double wall_seconds = 0.0;
  double test_accuracy = 0.0;
};

struct MetricsTrace {
  std::vector<MetricsRecord> records;

  /// First round whose optimality error is <= target.
  std::optional<std::size_t> first_hit(double target) const;
  const MetricsRecord& last() const { return records.back(); }
};

/// Run seed of repetition `index`.
std::uint64_t seed_for(const ExperimentConfig& config, std::size_t index);

struct SeedRun {
  MetricsTrace trace;
  NetworkState final_state;
};

/// One repetition on a prebuilt problem. `stop_at_target` ends the run at the
/// first round meeting config.target.
SeedRun run_seed(const Problem& problem, const ExperimentConfig& config, std::size_t index);

/// Record-wise mean of equally long traces (q_error kept only when every trace has it).
MetricsTrace average_traces(std::span<const MetricsTrace> traces);

struct ExperimentResult {
  std::optional<RateCertificate> certificate;
  std::vector<MetricsTrace> traces;
  MetricsTrace mean;
  std::vector<std::string> files;
};

/// Builds the problem, certifies second-order runs (CertificationError on
/// failure unless allow_uncertified), runs every seed and, when an output
/// directory is set, writes one JSONL trace per seed and a mean CSV.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Header line (config and certificate) followed by one JSON object per round.
void write_jsonl(std::ostream& out, const ExperimentConfig& config,
                 const std::optional<RateCertificate>& certificate, std::size_t seed_index,
                 const MetricsTrace& trace);
void write_csv(std::ostream& out, const MetricsTrace& trace);
std::string certificate_json(const RateCertificate& certificate, int indent = -1);

struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};

struct GridPoint {
  std::vector<std::pair<std::string, std::string>> settings;
  double mean_rounds = 0.0;  // +inf unless every seed reached the target
  double mean_bits = 0.0;    // bits spent at each seed's first hit, +inf likewise
  double final_error = 0.0;  // seed-mean optimality error at the end of the run
};

struct TuneResult {
  GridPoint best;
  std::vector<GridPoint> evaluated;
};

/// Full Cartesian grid over the axes. Picks the fewest mean rounds to
/// config.target; ties go to the smaller final error. Throws ParameterError on
/// an empty grid.
TuneResult tune_baseline(const ExperimentConfig& config, std::span<const GridAxis> grid);

/// "config = <path>" plus "grid.<key> = v1, v2, ..." lines; other keys are
/// plain overrides applied on top of the base config.
struct GridFile {
  ExperimentConfig config;
  std::vector<GridAxis> axes;
};
GridFile load_grid(std::istream& in, const std::string& base_dir = ".");

}  // namespace stsopro
