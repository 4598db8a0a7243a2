// Command-line front end: run, certify, reference, tune.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stsopro/errors.hpp"
#include "stsopro/harness.hpp"

using namespace stsopro;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::string> algorithm;
  std::optional<std::size_t> seeds;
  std::optional<double> beta;
  std::optional<double> mu;
  std::optional<std::size_t> batch_g;
  std::optional<std::size_t> batch_s;
  std::optional<std::string> out;
  std::vector<std::string> settings;
};

void add_config_options(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_path, "key = value config file")->required();
  app->add_option("--set", o.settings, "extra key=value override (repeatable)");
}

void apply_overrides(ExperimentConfig& config, const std::vector<std::string>& settings) {
  for (const auto& s : settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParameterError("--set expects key=value, got " + s);
    apply_setting(config, s.substr(0, eq), s.substr(eq + 1));
  }
}

ExperimentConfig resolve(const Overrides& o) {
  auto config = load_config(o.config_path);
  if (o.algorithm) apply_setting(config, "algorithm", *o.algorithm);
  if (o.seeds) config.seeds = *o.seeds;
  if (o.beta) config.run.beta = *o.beta;
  if (o.mu) config.run.mu = *o.mu;
  if (o.batch_g) config.run.batch_g = *o.batch_g;
  if (o.batch_s) config.run.batch_s = *o.batch_s;
  if (o.out) config.out_dir = *o.out;
  apply_overrides(config, o.settings);
  return config;
}

int cmd_run(const Overrides& o) {
  const auto config = resolve(o);
  const auto result = run_experiment(config);
  if (result.certificate) {
    std::printf("certificate: delta_s=%.6g steady_bound=%.6g\n", result.certificate->delta_s,
                result.certificate->steady_bound);
  }
  for (std::size_t s = 0; s < result.traces.size(); ++s) {
    const auto& last = result.traces[s].last();
    std::printf("seed %zu: rounds=%zu opt_error=%.6e comm_bits=%llu\n", s, last.round,
                last.opt_error, static_cast<unsigned long long>(last.comm_bits));
  }
  if (const auto hit = result.mean.first_hit(config.target)) {
    std::printf("mean error reached %.3g at round %zu\n", config.target, *hit);
  } else {
    std::printf("mean error did not reach %.3g\n", config.target);
  }
  for (const auto& f : result.files) std::printf("wrote %s\n", f.c_str());
  return 0;
}

int cmd_certify(const Overrides& o) {
  const auto config = resolve(o);
  const auto problem = build_problem(config);
  const auto cert = certify(certificate_inputs(problem, config));
  std::cout << certificate_json(cert, 2) << '\n';
  return 0;
}

int cmd_reference(const Overrides& o) {
  const auto config = resolve(o);
  const auto problem = build_problem(config);
  Vector g = Vector::Zero(problem.dim);
  double f = 0.0;
  for (const auto& ds : problem.agents) {
    g += local_grad(problem.x_star, ds);
    f += local_loss(problem.x_star, ds);
  }
  std::printf("agents=%zu dim=%zu samples_per_agent=%zu test=%zu\n", problem.num_agents(),
              problem.dim, problem.agents.front().size(), problem.test.size());
  std::printf("objective=%.17g\n||grad||=%.3e\n||x*||=%.17g\n", f, g.norm(),
              problem.x_star.norm());
  std::printf("lambda_W=%.6g lambda_max=%.6g M=%.6g sigma_sq=%.6g\n", problem.spectra.lambda_W,
              problem.spectra.lambda_max, problem.bounds.max_M(), problem.sigma_sq);
  std::printf("test_accuracy=%.4f\n", accuracy(problem.x_star, problem.test));
  return 0;
}

int cmd_tune(const std::string& grid_path, const std::vector<std::string>& settings) {
  std::ifstream in(grid_path);
  if (!in) throw ParameterError("cannot open grid file " + grid_path);
  const auto base = std::filesystem::path(grid_path).parent_path().string();
  auto grid = load_grid(in, base.empty() ? "." : base);
  apply_overrides(grid.config, settings);
  const auto result = tune_baseline(grid.config, grid.axes);
  for (const auto& p : result.evaluated) {
    for (const auto& [k, v] : p.settings) std::printf("%s=%s ", k.c_str(), v.c_str());
    std::printf("rounds=%g bits=%g final_error=%.3e\n", p.mean_rounds, p.mean_bits,
                p.final_error);
  }
  std::printf("best:");
  for (const auto& [k, v] : result.best.settings) std::printf(" %s=%s", k.c_str(), v.c_str());
  std::printf(" rounds=%g\n", result.best.mean_rounds);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized stochastic second-order proximal optimization"};
  app.require_subcommand(1);

  Overrides run_o, cert_o, ref_o;
  auto* run = app.add_subcommand("run", "run all seeds and write traces");
  add_config_options(run, run_o);
  run->add_option("--algorithm", run_o.algorithm, "st_sopro|sopro|dsgd|dsgt");
  run->add_option("--seeds", run_o.seeds);
  run->add_option("--beta", run_o.beta);
  run->add_option("--mu", run_o.mu);
  run->add_option("--batch-g", run_o.batch_g);
  run->add_option("--batch-s", run_o.batch_s);
  run->add_option("--out", run_o.out, "output directory (default: $STSOPRO_OUT_DIR)");

  auto* cert = app.add_subcommand("certify", "print the rate certificate");
  add_config_options(cert, cert_o);
  auto* ref = app.add_subcommand("reference", "solve for x* and print diagnostics");
  add_config_options(ref, ref_o);

  std::string grid_path;
  auto* tune = app.add_subcommand("tune", "grid search for iterations to target");
  std::vector<std::string> tune_settings;
  tune->add_option("--grid", grid_path, "grid file")->required();
  tune->add_option("--set", tune_settings, "key=value override of the base config (repeatable)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_o);
    if (*cert) return cmd_certify(cert_o);
    if (*ref) return cmd_reference(ref_o);
    if (*tune) return cmd_tune(grid_path, tune_settings);
  } catch (const ParameterError& e) {
    std::cerr << "parameter error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const CertificationError& e) {
    std::cerr << "certification failed: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
