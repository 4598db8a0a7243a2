#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "fixtures.hpp"
#include "stsopro/baselines.hpp"
#include "stsopro/engine.hpp"
#include "stsopro/errors.hpp"
#include "stsopro/harness.hpp"

using namespace stsopro;
using namespace testing;

namespace {

RunConfig first_order(Algorithm a, std::size_t G, double step) {
  RunConfig c;
  c.algorithm = a;
  c.batch_g = G;
  c.step_size = step;
  c.seed = 21;
  c.max_iters = 40;
  return c;
}

// f_i = lambda_i / 2 ||x||^2 (+ a constant): a quadratic with exact gradient lambda_i x.
std::vector<LocalDataset> quadratics(std::initializer_list<double> lambdas, std::size_t d) {
  std::vector<LocalDataset> out;
  for (double l : lambdas) out.emplace_back(std::vector<Sample>{Sample{SparseVector{}, 1}}, d, l);
  return out;
}

}  // namespace

TEST_CASE("Metropolis weights") {
  SUBCASE("two nodes") {
    Graph g(2, {{0, 1}});
    auto W = metropolis_weights(g).matrix();
    CHECK(W.isApprox(Matrix::Constant(2, 2, 0.5), 1e-15));
  }
  SUBCASE("triangle") {
    Graph g(3, {{0, 1}, {1, 2}, {0, 2}});
    auto W = metropolis_weights(g).matrix();
    CHECK(W.isApprox(Matrix::Constant(3, 3, 1.0 / 3.0), 1e-15));
  }
  SUBCASE("random graphs: doubly stochastic, nonnegative, gap > 0, sparse") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto g = build_random_connected_graph(12, 3.0, seed);
      auto W = metropolis_weights(g).matrix();
      CHECK((W.rowwise().sum() - Vector::Ones(12)).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((W.colwise().sum().transpose() - Vector::Ones(12)).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK(W.minCoeff() >= 0.0);
      CHECK(W == W.transpose());
      for (int i = 0; i < 12; ++i) {
        for (int j = 0; j < 12; ++j) {
          if (i != j && !g.has_edge(i, j)) CHECK(W(i, j) == 0.0);
        }
      }
      Eigen::SelfAdjointEigenSolver<Matrix> es(W);
      auto ev = es.eigenvalues();
      CHECK(ev[11] == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(std::max(std::abs(ev[0]), std::abs(ev[10])) < 1.0 - 1e-6);
    }
  }
  SUBCASE("weights outside the graph are rejected") {
    Graph g(3, {{0, 1}, {1, 2}});
    CHECK_THROWS_AS(MixingMatrix(g, Matrix::Constant(3, 3, 1.0 / 3.0)), ParameterError);
  }
}

TEST_CASE("step schedules") {
  auto c = first_order(Algorithm::dsgd, 1, 0.4);
  CHECK(baseline_step(c, 10) == 0.4);
  c.schedule = StepSchedule::inverse;
  c.step_decay = 0.5;
  CHECK(baseline_step(c, 0) == 0.4);
  CHECK(baseline_step(c, 2) == doctest::Approx(0.2));
}

TEST_CASE("DSGD") {
  SUBCASE("consensus at a zero-gradient point is unchanged") {
    auto agents = quadratics({0.5, 1.0, 2.0}, 2);
    auto topo = path(3);
    auto mixing = metropolis_weights(topo.graph());
    NetworkState s;
    s.agents.resize(3);
    for (auto& a : s.agents) a.x = Vector::Zero(2);
    auto c = first_order(Algorithm::dsgd, 1, 0.3);
    dsgd_round(s, mixing, 0.3, agents, c);
    for (const auto& a : s.agents) CHECK(a.x.isZero(0));
    CHECK(s.comm_scalars == 2 * 2 * 2);
  }
  SUBCASE("one agent is centralised gradient descent") {
    auto agents = blob_agents(1, 8, 3, 0.1, 2);
    Graph g(1, {});
    auto mixing = metropolis_weights(g);
    auto c = first_order(Algorithm::dsgd, 8, 0.5);
    NetworkState s;
    s.agents.resize(1);
    s.agents[0].x = Vector::Ones(3);
    Vector x = s.agents[0].x;
    for (int k = 0; k < 10; ++k) {
      dsgd_round(s, mixing, 0.5, agents, c);
      x -= 0.5 * local_grad(x, agents[0]);
      CHECK(rel_err(s.agents[0].x, x) <= 1e-14);
    }
    CHECK(s.comm_scalars == 0);
  }
  SUBCASE("quadratics contract at the closed-form rate of W - alpha Lambda") {
    auto agents = quadratics({0.5, 1.0, 2.0, 1.5}, 1);
    auto topo = ring(4);
    auto mixing = metropolis_weights(topo.graph());
    const double alpha = 0.3;
    Matrix T = mixing.matrix();
    for (int i = 0; i < 4; ++i) T(i, i) -= alpha * agents[i].lambda();
    Eigen::SelfAdjointEigenSolver<Matrix> es(T);
    const double rate = es.eigenvalues().cwiseAbs().maxCoeff();
    REQUIRE(rate <= 1.0);
    NetworkState s;
    for (double v : {1.0, -2.0, 0.5, 3.0}) s.agents.push_back(AgentState{Vector::Constant(1, v), {}, {}, {}, {}});
    auto c = first_order(Algorithm::dsgd, 1, alpha);
    auto dist = [&] {
      double d = 0;
      for (const auto& a : s.agents) d += a.x.squaredNorm();
      return std::sqrt(d);
    };
    for (int k = 0; k < 30; ++k) {
      const double before = dist();
      dsgd_round(s, mixing, alpha, agents, c);
      CHECK(dist() <= rate * before * (1 + 1e-12));
    }
  }
}

TEST_CASE("DSGT") {
  SUBCASE("tracking identity with exact and with sampled gradients") {
    auto topo = laplacian_weights(build_random_connected_graph(6, 3.0, 2));
    auto agents = blob_agents(6, 10, 4, 0.1, 3);
    for (std::size_t G : {10u, 3u}) {
      auto c = first_order(Algorithm::dsgt, G, 0.2);
      c.max_iters = 200;
      run(topo, agents, c, [&](const RoundView& v) {
        Vector t = Vector::Zero(4), g = Vector::Zero(4);
        for (std::size_t i = 0; i < 6; ++i) {
          t += v.state.agents[i].tracker;
          g += G == 10 ? local_grad(v.state.agents[i].x, agents[i]) : v.state.agents[i].last_grad;
        }
        CHECK((t - g).norm() <= 1e-10);
        return true;
      });
    }
  }
  SUBCASE("consensus at the optimum with identical data is stationary") {
    auto one = blob_agents(1, 10, 3, 0.1, 5).front();
    std::vector<LocalDataset> agents(4, one);
    auto x_star = solve_reference(agents);
    auto topo = ring(4);
    auto c = first_order(Algorithm::dsgt, 10, 0.3);
    c.init = InitMode::zero;
    Engine engine(topo, agents, c);
    auto s = engine.initial_state();
    for (auto& a : s.agents) {
      a.x = x_star;
      a.last_grad = local_grad(x_star, one);
      a.tracker = a.last_grad;
    }
    for (int k = 0; k < 20; ++k) {
      engine.step(s);
      for (const auto& a : s.agents) CHECK((a.x - x_star).norm() <= 1e-12);
    }
  }
  SUBCASE("one agent is centralised gradient descent") {
    auto agents = blob_agents(1, 8, 3, 0.1, 2);
    Graph g(1, {});
    auto mixing = metropolis_weights(g);
    auto c = first_order(Algorithm::dsgt, 8, 0.5);
    NetworkState s;
    s.agents.resize(1);
    s.agents[0].x = Vector::Ones(3);
    dsgt_initialize(s, agents, c);
    Vector x = Vector::Ones(3);
    for (int k = 0; k < 10; ++k) {
      dsgt_round(s, mixing, 0.5, agents, c);
      x -= 0.5 * local_grad(x, agents[0]);
      CHECK(rel_err(s.agents[0].x, x) <= 1e-13);
    }
  }
}
