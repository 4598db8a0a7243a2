#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stsopro/optimizer.hpp"

namespace stsopro {

/// One experiment: data source, problem shape, algorithm settings and output.
///
/// The problem (data, topology, partition) is fixed by `problem_seed`; the
/// `seeds` repetitions vary only the algorithm's own randomness (x^0 and
/// batch draws).
struct ExperimentConfig {
  // "synthetic_blobs", "synthetic_categorical" or a LIBSVM file path
  std::string dataset = "synthetic_blobs";
  std::size_t min_dim = 0;
  std::size_t synthetic_samples = 300;
  std::size_t synthetic_dim = 10;
  double synthetic_separation = 1.0;
  double synthetic_noise = 1.0;
  std::size_t synthetic_groups = 16;
  std::size_t synthetic_categories = 7;
  double synthetic_signal = 0.5;
  double synthetic_concentration = 1.0;
  std::uint64_t data_seed = 1;

  std::size_t n_agents = 5;
  double avg_degree = 2.0;
  std::size_t per_agent = 50;
  double lambda = 0.01;
  std::string topology_file;  // optional edge list; overrides the random graph
  double edge_weight = 1.0;
  std::uint64_t problem_seed = 1;

  RunConfig run;
  double c1 = 1.0;

  std::size_t seeds = 1;
  double target = 0.1;
  bool stop_at_target = false;
  std::string out_dir;
  bool allow_uncertified = false;
  bool record_wall_time = false;
  bool q_error = true;
};

/// Sets one key from its text value. Throws ParameterError on unknown keys or
/// malformed values.
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value);

/// Flat "key = value" lines; '#' starts a comment. Unknown keys are errors.
ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {});
ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {});

/// Every key with its current value, in a stable order.
std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& config);

/// Raw key/value lines, for formats layered on the config syntax (tuning grids).
std::vector<std::pair<std::string, std::string>> read_key_values(std::istream& in);

}  // namespace stsopro
