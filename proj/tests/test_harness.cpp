#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "fixtures.hpp"
#include "stsopro/baselines.hpp"
#include "stsopro/errors.hpp"
#include "stsopro/harness.hpp"

using namespace stsopro;
using namespace testing;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.dataset = "synthetic_blobs";
  c.synthetic_samples = 300;
  c.synthetic_dim = 10;
  c.synthetic_separation = 1.0;
  c.synthetic_noise = 0.5;
  c.n_agents = 5;
  c.avg_degree = 2.0;
  c.per_agent = 50;
  c.lambda = 0.3;
  c.run.algorithm = Algorithm::sopro;
  c.run.beta = 1.0;
  c.run.mu = 10.0;
  c.run.batch_g = 10;
  c.run.batch_s = 10;
  c.run.max_iters = 60;
  c.seeds = 1;
  return c;
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("stsopro_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("reference solver") {
  SUBCASE("a zero feature vector gives x* = 0") {
    std::vector<LocalDataset> ds{LocalDataset({Sample{SparseVector{}, 1}}, 3, 0.1)};
    CHECK(solve_reference(ds).isZero(0));
  }
  SUBCASE("symmetric pair gives x* = 0") {
    std::vector<LocalDataset> ds{
        LocalDataset({dense_sample({1.0, 2.0}, 1), dense_sample({1.0, 2.0}, -1)}, 2, 0.01)};
    CHECK(solve_reference(ds).norm() <= 1e-12);
  }
  SUBCASE("gradient norm at x* is below the tolerance") {
    auto agents = blob_agents(6, 40, 8, 0.01, 3);
    auto x = solve_reference(agents);
    Vector g = Vector::Zero(8);
    for (const auto& ds : agents) g += local_grad(x, ds);
    CHECK(g.norm() <= 1e-12);
    CHECK(solve_reference_cached(agents) == x);
    CHECK(solve_reference_cached(agents) == x);
  }
  SUBCASE("iteration cap") {
    auto agents = blob_agents(2, 20, 4, 0.001, 3);
    CHECK_THROWS_AS(solve_reference(agents, 1e-12, 1), ConfigurationError);
  }
}

TEST_CASE("optimality error") {
  const Vector xs = Vector::Constant(3, 0.5);
  NetworkState s;
  s.agents.push_back(AgentState{xs, {}, {}, {}, {}});
  s.agents.push_back(AgentState{xs, {}, {}, {}, {}});
  CHECK(optimality_error(s, xs) == 0.0);
  s.agents[0].x = xs + Vector::Unit(3, 0);
  s.agents[1].x = xs + 3.0 * Vector::Unit(3, 2);
  CHECK(optimality_error(s, xs) == 5.0);

  std::mt19937_64 rng(1);
  NetworkState r;
  Vector stacked(4 * 3), star(4 * 3);
  for (int i = 0; i < 4; ++i) {
    r.agents.push_back(AgentState{random_vector(3, rng), {}, {}, {}, {}});
    stacked.segment(i * 3, 3) = r.agents.back().x;
    star.segment(i * 3, 3) = xs;
  }
  CHECK(optimality_error(r, xs) == doctest::Approx((stacked - star).squaredNorm() / 4).epsilon(1e-14));
}

TEST_CASE("accuracy") {
  auto data = make_gaussian_blobs(200, 4, 0.5, 1.0, 5);
  const Vector zero = Vector::Zero(4);
  double positives = 0;
  for (const auto& s : data.samples) positives += s.label == 1;
  CHECK(accuracy(zero, data.samples) == doctest::Approx(positives / 200).epsilon(1e-15));

  auto s = dense_sample({0.3, -1.0}, -1);
  std::vector<Sample> one{s};
  CHECK(accuracy(-s.features.to_dense(2), one) == 1.0);

  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    Vector x = random_vector(4, rng);
    std::size_t correct = 0;
    for (const auto& smp : data.samples) {
      const Vector a = smp.features.to_dense(4);
      const int pred = a.dot(x) >= 0 ? 1 : -1;
      correct += pred == smp.label;
    }
    CHECK(accuracy(x, data.samples) == doctest::Approx(correct / 200.0).epsilon(1e-15));
  }
  std::vector<Sample> none;
  CHECK(std::isnan(accuracy(zero, none)));
}

TEST_CASE("problem construction is fixed by problem_seed") {
  auto c = small_config();
  auto a = build_problem(c);
  auto b = build_problem(c);
  CHECK(a.x_star == b.x_star);
  CHECK(a.laplacian().matrix() == b.laplacian().matrix());
  CHECK(a.num_agents() == 5);
  CHECK(a.test.size() == 50);
  CHECK(a.sigma_sq > 0.0);
  c.problem_seed = 2;
  CHECK(build_problem(c).laplacian().matrix() != a.laplacian().matrix());
}

TEST_CASE("run_experiment writes self-describing, reproducible traces") {
  auto c = small_config();
  c.run.algorithm = Algorithm::st_sopro;
  c.run.mu = 30.0;
  c.seeds = 2;
  const auto d1 = temp_dir("a"), d2 = temp_dir("b");
  c.out_dir = d1.string();
  auto r1 = run_experiment(c);
  c.out_dir = d2.string();
  auto r2 = run_experiment(c);
  REQUIRE(r1.files.size() == 3);
  REQUIRE(r1.certificate.has_value());
  for (std::size_t k = 0; k < r1.files.size(); ++k) {
    // headers name their own output directory; rows must match byte for byte
    auto rows = [](const std::string& text) { return text.substr(text.find('\n') + 1); };
    CHECK(rows(slurp(r1.files[k])) == rows(slurp(r2.files[k])));
  }
  c.out_dir = d1.string();
  const auto before = slurp(r1.files[0]);
  run_experiment(c);
  CHECK(slurp(r1.files[0]) == before);

  std::ifstream in(r1.files[0]);
  std::string line;
  std::getline(in, line);
  auto header = nlohmann::json::parse(line);
  CHECK(header["type"] == "header");
  CHECK(header["config"]["algorithm"] == "st_sopro");
  CHECK(header["certificate"]["delta_s"].get<double>() == r1.certificate->delta_s);
  std::size_t last_round = 0;
  std::uint64_t last_bits = 0;
  bool first = true;
  while (std::getline(in, line)) {
    auto row = nlohmann::json::parse(line);
    const auto round = row["round"].get<std::size_t>();
    const auto bits = row["comm_bits"].get<std::uint64_t>();
    CHECK(bits == 32 * row["comm_scalars"].get<std::uint64_t>());
    if (!first) {
      CHECK(round > last_round);
      CHECK(bits > last_bits);
    }
    CHECK_FALSE(row.contains("wall_seconds"));
    CHECK(row["q_error"].is_number());
    first = false;
    last_round = round;
    last_bits = bits;
  }
  CHECK(last_round == c.run.max_iters);

  const auto csv = slurp(r1.files[2]);
  CHECK(csv.rfind("round,opt_error,q_error,comm_bits,test_accuracy\n", 0) == 0);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("certification gate") {
  auto c = small_config();
  c.run.mu = 1.0;
  CHECK_THROWS_AS(run_experiment(c), CertificationError);
  c.allow_uncertified = true;
  auto r = run_experiment(c);
  CHECK_FALSE(r.certificate.has_value());
  CHECK(r.traces.size() == 1);
}

TEST_CASE("deterministic SoPro contracts in the Q-norm") {
  auto c = small_config();
  c.run.mu = 10.0;
  c.run.max_iters = 800;
  auto r = run_experiment(c);
  REQUIRE(r.certificate.has_value());
  double min_R = 1e300;
  for (double R : r.certificate->R_diag) min_R = std::min(min_R, R);
  const auto& rec = r.mean.records;
  for (std::size_t k = 1; k < rec.size(); ++k) {
    // ||z - z*||_Q^2 >= beta min_i R_i sum_i ||x_i - x*||^2
    CHECK(rec[k].opt_error * c.n_agents * c.run.beta * min_R <= *rec[k].q_error * (1 + 1e-9));
    if (*rec[k - 1].q_error > 1e-20) CHECK(*rec[k].q_error < *rec[k - 1].q_error);
  }
  CHECK(r.mean.first_hit(1e-9).has_value());
}

TEST_CASE("trace averaging") {
  MetricsTrace a, b;
  a.records.push_back({0, 1.0, 2.0, 4, 128, 0.0, 0.5});
  b.records.push_back({0, 3.0, std::nullopt, 4, 128, 0.0, 1.0});
  a.records.push_back({1, 1.0, 2.0, 8, 256, 0.0, 0.5});
  std::vector<MetricsTrace> both{a, b};
  auto m = average_traces(both);
  REQUIRE(m.records.size() == 1);
  CHECK(m.records[0].opt_error == 2.0);
  CHECK_FALSE(m.records[0].q_error.has_value());
  CHECK(m.records[0].test_accuracy == 0.75);
}

TEST_CASE("baseline tuning") {
  auto c = small_config();
  c.run.algorithm = Algorithm::dsgd;
  c.run.batch_g = 50;
  c.run.max_iters = 300;
  c.target = 1e-1;
  c.seeds = 2;

  SUBCASE("single point") {
    std::vector<GridAxis> grid{{"step_size", {"0.1"}}};
    auto r = tune_baseline(c, grid);
    CHECK(r.evaluated.size() == 1);
    CHECK(r.best.settings.front().second == "0.1");
  }
  SUBCASE("a divergent step is never chosen") {
    std::vector<GridAxis> grid{{"step_size", {"50", "0.01", "0.2"}}};
    auto r = tune_baseline(c, grid);
    CHECK(std::isinf(r.evaluated[0].mean_rounds));
    CHECK(r.best.settings.front().second != "50");
  }
  SUBCASE("Cartesian product") {
    std::vector<GridAxis> grid{{"step_size", {"0.1", "0.2"}}, {"step_schedule", {"constant", "inverse"}}};
    CHECK(tune_baseline(c, grid).evaluated.size() == 4);
  }
  SUBCASE("empty grid") {
    std::vector<GridAxis> grid;
    CHECK_THROWS_AS(tune_baseline(c, grid), ParameterError);
  }
  SUBCASE("scalar quadratic: picks the step with the smallest closed-form contraction") {
    auto q = c;
    q.synthetic_dim = 1;
    q.synthetic_separation = 0.0;
    q.synthetic_noise = 0.0;
    q.lambda = 1.0;
    q.n_agents = 6;
    q.avg_degree = 2.5;
    q.per_agent = 10;
    q.synthetic_samples = 60;
    q.run.batch_g = 10;
    q.target = 1e-8;
    const std::vector<std::string> steps{"0.2", "0.4", "0.6", "0.8", "1.0", "1.2"};
    auto problem = build_problem(q);
    auto W = metropolis_weights(problem.laplacian().graph()).matrix();
    Eigen::SelfAdjointEigenSolver<Matrix> es(W);
    double best_rate = 1e300;
    std::string best_step;
    for (const auto& s : steps) {
      const double a = std::stod(s);
      const double rate = (es.eigenvalues().array() - a).abs().maxCoeff();
      if (rate < best_rate) {
        best_rate = rate;
        best_step = s;
      }
    }
    std::vector<GridAxis> grid{{"step_size", steps}};
    auto r = tune_baseline(q, grid);
    CHECK(r.best.settings.front().second == best_step);
  }
}
