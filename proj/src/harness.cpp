#include "stsopro/harness.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "stsopro/errors.hpp"
#include "stsopro/rng.hpp"
#include "stsopro/synthetic.hpp"

namespace stsopro {

namespace {

using json = nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

double total_loss(const Vector& x, std::span<const LocalDataset> datasets) {
  double f = 0.0;
  for (const auto& ds : datasets) f += local_loss(x, ds);
  return f;
}

Vector total_grad(const Vector& x, std::span<const LocalDataset> datasets) {
  Vector g = Vector::Zero(x.size());
  for (const auto& ds : datasets) g += local_grad(x, ds);
  return g;
}

Matrix total_hess(const Vector& x, std::span<const LocalDataset> datasets) {
  Matrix h = Matrix::Zero(x.size(), x.size());
  for (const auto& ds : datasets) local_hess(x, ds).add_to(h);
  return h;
}

std::uint64_t fingerprint(std::span<const LocalDataset> datasets, double tol) {
  std::uint64_t h = mix_seed(datasets.size(), std::bit_cast<std::uint64_t>(tol));
  for (const auto& ds : datasets) {
    h = mix_seed(h, ds.size());
    h = mix_seed(h, ds.dim());
    h = mix_seed(h, std::bit_cast<std::uint64_t>(ds.lambda()));
    for (const auto& s : ds.samples()) {
      h = mix_seed(h, static_cast<std::uint64_t>(s.label + 2));
      for (std::size_t k = 0; k < s.features.nnz(); ++k) {
        h = mix_seed(h, s.features.index[k]);
        h = mix_seed(h, std::bit_cast<std::uint64_t>(s.features.value[k]));
      }
    }
  }
  return h;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json record_json(const MetricsRecord& r, bool wall) {
  json row;
  row["round"] = r.round;
  row["opt_error"] = number_or_null(r.opt_error);
  row["q_error"] = r.q_error ? number_or_null(*r.q_error) : json(nullptr);
  row["comm_scalars"] = r.comm_scalars;
  row["comm_bits"] = r.comm_bits;
  row["test_accuracy"] = number_or_null(r.test_accuracy);
  if (wall) row["wall_seconds"] = r.wall_seconds;
  return row;
}

json certificate_object(const RateCertificate& c) {
  return json{{"num_agents", c.num_agents}, {"m_fbar", c.m_fbar},
              {"M", c.M},                   {"m_beta", c.m_beta},
              {"gamma", c.gamma},           {"lambda_W", c.lambda_W},
              {"lambda_max", c.lambda_max}, {"beta", c.beta},
              {"tau", c.tau},               {"sigma_sq", c.sigma_sq},
              {"eta_s", c.eta_s},           {"c0", c.c0},
              {"c1", c.c1},                 {"c2_star", c.c2_star},
              {"kappa", c.kappa},           {"delta_s", c.delta_s},
              {"Gamma", c.Gamma},           {"steady_bound", c.steady_bound},
              {"condition_margin", c.condition_margin},
              {"R_diag", c.R_diag}};
}

std::string output_dir(const ExperimentConfig& config) {
  if (!config.out_dir.empty()) return config.out_dir;
  if (const char* env = std::getenv("STSOPRO_OUT_DIR")) return env;
  return {};
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

LabeledData load_dataset(const ExperimentConfig& config) {
  if (config.dataset == "synthetic_blobs") {
    return make_gaussian_blobs(config.synthetic_samples, config.synthetic_dim,
                               config.synthetic_separation, config.synthetic_noise,
                               config.data_seed);
  }
  if (config.dataset == "synthetic_categorical") {
    return make_categorical(config.synthetic_samples, config.synthetic_groups,
                            config.synthetic_categories, config.synthetic_signal,
                            config.data_seed, config.synthetic_concentration);
  }
  std::ifstream in(config.dataset);
  if (!in) throw ParameterError("cannot open dataset " + config.dataset);
  return parse_libsvm(in, config.min_dim);
}

Vector solve_reference(std::span<const LocalDataset> datasets, double tol, std::size_t max_iters) {
  if (datasets.empty()) throw ParameterError("solve_reference needs at least one dataset");
  Vector x = Vector::Zero(datasets.front().dim());
  for (std::size_t it = 0; it < max_iters; ++it) {
    const Vector g = total_grad(x, datasets);
    if (g.norm() <= tol) return x;
    const Vector dir = total_hess(x, datasets).llt().solve(-g);
    const double decrement = -g.dot(dir);
    // Pure Newton inside the quadratic region; the loss values there differ
    // by less than their rounding error and cannot drive a line search.
    if (decrement < 1e-12) {
      x += dir;
      continue;
    }
    const double f0 = total_loss(x, datasets);
    double t = 1.0;
    while (t > 1e-12 && total_loss(x + t * dir, datasets) > f0 - 1e-4 * t * decrement) t *= 0.5;
    x += t * dir;
  }
  if (total_grad(x, datasets).norm() <= tol) return x;
  throw ConfigurationError("reference solver did not reach gradient norm " + std::to_string(tol) +
                           " in " + std::to_string(max_iters) + " iterations");
}

Vector solve_reference_cached(std::span<const LocalDataset> datasets, double tol) {
  static std::mutex mutex;
  static std::map<std::uint64_t, Vector> cache;
  const auto key = fingerprint(datasets, tol);
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  Vector x = solve_reference(datasets, tol);
  std::lock_guard lock(mutex);
  cache.emplace(key, x);
  return x;
}

double optimality_error(const NetworkState& state, const Vector& x_star) {
  double sum = 0.0;
  for (const auto& a : state.agents) sum += (a.x - x_star).squaredNorm();
  return sum / static_cast<double>(state.num_agents());
}

double accuracy(const Vector& x, std::span<const Sample> test) {
  if (test.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t correct = 0;
  for (const auto& s : test) {
    const int predicted = s.features.dot(x) >= 0.0 ? 1 : -1;
    if (predicted == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

std::vector<Vector> sigma_probes(std::span<const LocalDataset> datasets, const Vector& x_star) {
  const auto d = x_star.size();
  std::vector<Vector> probes{Vector::Zero(d), x_star, 0.5 * x_star};
  const auto bounds = network_smoothness(datasets);
  double L = 0.0;
  for (double M : bounds.M) L += M;
  Vector x = Vector::Zero(d);
  for (int k = 0; k < 4; ++k) {
    x -= total_grad(x, datasets) / L;
    probes.push_back(x);
  }
  return probes;
}

Problem build_problem(const ExperimentConfig& config) {
  if (config.n_agents < 2) throw ParameterError("n_agents must be at least 2");
  Problem p;
  auto data = load_dataset(config);
  auto split = partition(data, config.n_agents, config.per_agent, config.lambda,
                         config.problem_seed);
  p.agents = std::move(split.agents);
  p.test = std::move(split.test);
  p.dim = split.dim;

  if (!config.topology_file.empty()) {
    std::ifstream in(config.topology_file);
    if (!in) throw ParameterError("cannot open topology file " + config.topology_file);
    p.topology.emplace(read_edge_list(in));
    if (p.topology->num_agents() != config.n_agents) {
      throw ParameterError("topology file has " + std::to_string(p.topology->num_agents()) +
                           " agents, config has " + std::to_string(config.n_agents));
    }
  } else {
    const auto graph =
        build_random_connected_graph(config.n_agents, config.avg_degree, config.problem_seed);
    p.topology.emplace(laplacian_weights(graph, config.edge_weight));
  }
  p.spectra = spectral_summary(p.topology->matrix());
  p.bounds = network_smoothness(p.agents);
  p.x_star = solve_reference_cached(p.agents);
  const auto probes = sigma_probes(p.agents, p.x_star);
  p.sigma_sq = sigma_sq_estimate(p.agents, probes);
  return p;
}

CertificateInputs certificate_inputs(const Problem& problem, const ExperimentConfig& config) {
  const auto& run = config.run;
  const std::size_t C = problem.agents.front().size();
  const std::size_t G = run.algorithm == Algorithm::sopro ? C : run.batch_g;
  CertificateInputs in;
  in.bounds = problem.bounds;
  in.m_fbar = static_cast<double>(problem.num_agents()) * config.lambda;
  in.P = problem.laplacian().matrix();
  in.spectra = problem.spectra;
  in.beta = run.beta;
  in.proximal = run.proximal == ProximalMode::explicit_blocks
                    ? explicit_D(run.explicit_blocks, problem.num_agents(), problem.dim)
                    : choose_D(problem.bounds, run.beta, run.mu, problem.spectra);
  in.dim = problem.dim;
  in.eta_s = run.eta_s;
  in.c1 = config.c1;
  in.sigma_sq = problem.sigma_sq;
  in.tau = tau(C, G);
  return in;
}

std::optional<std::size_t> MetricsTrace::first_hit(double target) const {
  for (const auto& r : records) {
    if (r.opt_error <= target) return r.round;
  }
  return std::nullopt;
}

std::uint64_t seed_for(const ExperimentConfig& config, std::size_t index) {
  return mix_seed(config.run.seed, index);
}

SeedRun run_seed(const Problem& problem, const ExperimentConfig& config, std::size_t index) {
  RunConfig rc = config.run;
  rc.seed = seed_for(config, index);
  const Engine engine(problem.laplacian(), problem.agents, rc);

  std::optional<QNormError> q_norm;
  if (config.q_error && is_second_order(rc.algorithm)) {
    q_norm.emplace(problem.laplacian().matrix(), engine.proximal_blocks(), problem.bounds, rc.beta,
                   problem.x_star, optimal_duals(problem.agents, problem.x_star));
  }

  SeedRun out;
  const auto start = std::chrono::steady_clock::now();
  auto callback = [&](const RoundView& view) {
    MetricsRecord r;
    r.round = view.round;
    r.opt_error = optimality_error(view.state, problem.x_star);
    if (q_norm && std::isfinite(r.opt_error)) r.q_error = (*q_norm)(view.state);
    r.comm_scalars = view.comm_scalars;
    r.comm_bits = 32 * view.comm_scalars;
    r.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.test_accuracy = accuracy(view.state.average_x(), problem.test);
    out.trace.records.push_back(r);
    if (!std::isfinite(r.opt_error) || r.opt_error > 1e100) return false;
    return !(config.stop_at_target && r.opt_error <= config.target);
  };
  out.final_state = engine.run(callback);
  return out;
}

MetricsTrace average_traces(std::span<const MetricsTrace> traces) {
  MetricsTrace mean;
  if (traces.empty()) return mean;
  std::size_t length = traces.front().records.size();
  for (const auto& t : traces) length = std::min(length, t.records.size());
  const double n = static_cast<double>(traces.size());
  for (std::size_t k = 0; k < length; ++k) {
    MetricsRecord r = traces.front().records[k];
    double opt = 0.0, q = 0.0, acc = 0.0, wall = 0.0;
    bool has_q = true;
    for (const auto& t : traces) {
      const auto& rec = t.records[k];
      opt += rec.opt_error;
      acc += rec.test_accuracy;
      wall += rec.wall_seconds;
      if (rec.q_error) {
        q += *rec.q_error;
      } else {
        has_q = false;
      }
    }
    r.opt_error = opt / n;
    r.test_accuracy = acc / n;
    r.wall_seconds = wall / n;
    r.q_error = has_q ? std::optional<double>(q / n) : std::nullopt;
    mean.records.push_back(r);
  }
  return mean;
}

std::string certificate_json(const RateCertificate& certificate, int indent) {
  return certificate_object(certificate).dump(indent);
}

void write_jsonl(std::ostream& out, const ExperimentConfig& config,
                 const std::optional<RateCertificate>& certificate, std::size_t seed_index,
                 const MetricsTrace& trace) {
  json cfg = json::object();
  for (const auto& [key, value] : config_entries(config)) cfg[key] = value;
  json header{{"type", "header"},
              {"config", cfg},
              {"seed_index", seed_index},
              {"seed", seed_for(config, seed_index)},
              {"certificate", certificate ? certificate_object(*certificate) : json(nullptr)}};
  out << header.dump() << '\n';
  for (const auto& r : trace.records) out << record_json(r, config.record_wall_time).dump() << '\n';
}

void write_csv(std::ostream& out, const MetricsTrace& trace) {
  out << "round,opt_error,q_error,comm_bits,test_accuracy\n";
  out.precision(17);
  for (const auto& r : trace.records) {
    out << r.round << ',' << r.opt_error << ',';
    if (r.q_error) out << *r.q_error;
    out << ',' << r.comm_bits << ',' << r.test_accuracy << '\n';
  }
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  if (config.seeds == 0) throw ParameterError("seeds must be positive");
  const Problem problem = build_problem(config);
  config.run.validate(problem.agents);

  ExperimentResult result;
  if (is_second_order(config.run.algorithm)) {
    try {
      result.certificate = certify(certificate_inputs(problem, config));
    } catch (const CertificationError&) {
      if (!config.allow_uncertified) throw;
    }
  }
  for (std::size_t s = 0; s < config.seeds; ++s) {
    result.traces.push_back(run_seed(problem, config, s).trace);
  }
  result.mean = average_traces(result.traces);

  const auto dir = output_dir(config);
  if (dir.empty()) return result;
  std::filesystem::create_directories(dir);
  const std::string stem = std::string(to_string(config.run.algorithm));
  for (std::size_t s = 0; s < result.traces.size(); ++s) {
    const auto path = (std::filesystem::path(dir) / (stem + "_seed" + std::to_string(s) + ".jsonl"))
                          .string();
    std::ofstream out(path);
    if (!out) throw ConfigurationError("cannot write " + path);
    write_jsonl(out, config, result.certificate, s, result.traces[s]);
    result.files.push_back(path);
  }
  const auto csv = (std::filesystem::path(dir) / (stem + "_mean.csv")).string();
  std::ofstream out(csv);
  if (!out) throw ConfigurationError("cannot write " + csv);
  write_csv(out, result.mean);
  result.files.push_back(csv);
  return result;
}

TuneResult tune_baseline(const ExperimentConfig& config, std::span<const GridAxis> grid) {
  if (grid.empty()) throw ParameterError("tuning grid is empty");
  for (const auto& axis : grid) {
    if (axis.values.empty()) throw ParameterError("grid axis " + axis.key + " has no values");
  }
  const Problem problem = build_problem(config);

  TuneResult result;
  std::vector<std::size_t> odometer(grid.size(), 0);
  while (true) {
    ExperimentConfig cfg = config;
    cfg.stop_at_target = true;
    GridPoint point;
    for (std::size_t a = 0; a < grid.size(); ++a) {
      const auto& value = grid[a].values[odometer[a]];
      apply_setting(cfg, grid[a].key, value);
      point.settings.emplace_back(grid[a].key, value);
    }
    cfg.run.validate(problem.agents);

    double rounds = 0.0, bits = 0.0, final_error = 0.0;
    bool all_hit = true;
    for (std::size_t s = 0; s < cfg.seeds; ++s) {
      const auto trace = run_seed(problem, cfg, s).trace;
      const double last = trace.last().opt_error;
      final_error += std::isfinite(last) ? last : kInf;
      if (const auto hit = trace.first_hit(cfg.target)) {
        rounds += static_cast<double>(*hit);
        bits += static_cast<double>(trace.records[*hit].comm_bits);
      } else {
        all_hit = false;
      }
    }
    const double n = static_cast<double>(cfg.seeds);
    point.mean_rounds = all_hit ? rounds / n : kInf;
    point.mean_bits = all_hit ? bits / n : kInf;
    point.final_error = final_error / n;
    result.evaluated.push_back(point);

    std::size_t a = 0;
    while (a < grid.size() && ++odometer[a] == grid[a].values.size()) odometer[a++] = 0;
    if (a == grid.size()) break;
  }

  result.best = *std::min_element(
      result.evaluated.begin(), result.evaluated.end(), [](const GridPoint& l, const GridPoint& r) {
        if (l.mean_rounds != r.mean_rounds) return l.mean_rounds < r.mean_rounds;
        return l.final_error < r.final_error;
      });
  return result;
}

GridFile load_grid(std::istream& in, const std::string& base_dir) {
  GridFile out;
  const auto entries = read_key_values(in);
  for (const auto& [key, value] : entries) {
    if (key == "config") {
      std::filesystem::path path(value);
      if (path.is_relative()) path = std::filesystem::path(base_dir) / path;
      out.config = load_config(path.string(), out.config);
    }
  }
  for (const auto& [key, value] : entries) {
    if (key == "config") continue;
    if (key.rfind("grid.", 0) == 0) {
      GridAxis axis{key.substr(5), split_list(value)};
      ExperimentConfig probe = out.config;
      for (const auto& v : axis.values) apply_setting(probe, axis.key, v);
      out.axes.push_back(std::move(axis));
    } else {
      apply_setting(out.config, key, value);
    }
  }
  if (out.axes.empty()) throw ParameterError("grid file has no grid.<key> lines");
  return out;
}

}  // namespace stsopro
