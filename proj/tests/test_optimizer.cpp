#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "fixtures.hpp"
#include "stsopro/engine.hpp"
#include "stsopro/errors.hpp"
#include "stsopro/optimizer.hpp"
#include "stsopro/stacked_reference.hpp"

using namespace stsopro;
using namespace testing;

namespace {

RunConfig second_order(Algorithm a, std::size_t G, std::size_t S, std::uint64_t seed = 3) {
  RunConfig c;
  c.algorithm = a;
  c.batch_g = G;
  c.batch_s = S;
  c.seed = seed;
  c.beta = 1.0;
  c.mu = 2.0;
  c.max_iters = 30;
  return c;
}

// A dataset whose only curvature is lambda: h = lambda I, g = lambda x.
LocalDataset flat(std::size_t d, double lambda) {
  return LocalDataset({Sample{SparseVector{}, 1}}, d, lambda);
}

}  // namespace

TEST_CASE("enum text round trips") {
  for (auto a : {Algorithm::st_sopro, Algorithm::sopro, Algorithm::dsgd, Algorithm::dsgt}) {
    CHECK(parse_algorithm(to_string(a)) == a);
  }
  CHECK(parse_init_mode("zero") == InitMode::zero);
  CHECK(parse_step_schedule("inverse") == StepSchedule::inverse);
  CHECK(parse_proximal_mode("explicit_blocks") == ProximalMode::explicit_blocks);
  CHECK_THROWS_AS(parse_algorithm("edas"), ParameterError);
}

TEST_CASE("config validation") {
  auto agents = blob_agents(2, 10, 3, 0.1, 1);
  auto c = second_order(Algorithm::st_sopro, 5, 5);
  CHECK_NOTHROW(c.validate(agents));
  auto bad = c;
  bad.batch_g = 11;
  CHECK_THROWS_AS(bad.validate(agents), ParameterError);
  bad = c;
  bad.batch_s = 0;
  CHECK_THROWS_AS(bad.validate(agents), ParameterError);
  bad = c;
  bad.beta = 0.0;
  CHECK_THROWS_AS(bad.validate(agents), ParameterError);
  bad = c;
  bad.mu = -1.0;
  CHECK_THROWS_AS(bad.validate(agents), ParameterError);
  bad = c;
  bad.eta_s = 1.0;
  CHECK_THROWS_AS(bad.validate(agents), ParameterError);
  bad = c;
  bad.algorithm = Algorithm::dsgd;
  bad.step_size = 0.0;
  CHECK_THROWS_AS(bad.validate(agents), ParameterError);
}

TEST_CASE("network initialisation") {
  auto topo = path(3);
  auto agents = blob_agents(3, 8, 4, 0.1, 2);
  SUBCASE("zero init gives zero disagreement") {
    auto c = second_order(Algorithm::st_sopro, 2, 2);
    c.init = InitMode::zero;
    auto s = init_network(topo, agents, c);
    for (const auto& a : s.agents) {
      CHECK(a.x.isZero(0));
      CHECK(a.y.isZero(0));
      CHECK(a.q.isZero(0));
    }
    CHECK(s.comm_scalars == 2 * 2 * 4);
    CHECK(s.round == 0);
  }
  SUBCASE("uniform init lies in [-1, 1] and sums of q vanish") {
    auto s = init_network(topo, agents, second_order(Algorithm::st_sopro, 2, 2));
    for (const auto& a : s.agents) CHECK(a.x.cwiseAbs().maxCoeff() <= 1.0);
    CHECK(s.dual_sum().isZero(0));
    CHECK(s.agents[0].x != s.agents[1].x);
  }
  SUBCASE("two agents with x1 = e1, x2 = 0") {
    Vector e1 = Vector::Unit(3, 0);
    auto s = init_network_at(path(2), {e1, Vector::Zero(3)}, {Vector::Zero(3), Vector::Zero(3)});
    CHECK(s.agents[0].y == e1);
    CHECK(s.agents[1].y == -e1);
  }
  SUBCASE("size mismatch") {
    auto c = second_order(Algorithm::st_sopro, 2, 2);
    CHECK_THROWS_AS(init_network(path(4), agents, c), ParameterError);
  }
}

TEST_CASE("batch sampling") {
  SUBCASE("G = C selects everything") {
    auto b = sample_batches(5, 1, 2, 12, 12, 4);
    std::vector<std::size_t> all(12);
    std::iota(all.begin(), all.end(), std::size_t{0});
    CHECK(b.grad == all);
    CHECK(b.hess.size() == 4);
    CHECK(full_batches(12).grad == all);
    CHECK(full_batches(12).hess == all);
  }
  SUBCASE("table-sized draws") {
    auto b = sample_batches(5, 0, 0, 239, 80, 10);
    CHECK(b.grad.size() == 80);
    CHECK(b.hess.size() == 10);
  }
  SUBCASE("deterministic per (seed, agent, round) and distinct across them") {
    CHECK(sample_batches(5, 1, 2, 50, 5, 5).grad == sample_batches(5, 1, 2, 50, 5, 5).grad);
    CHECK(sample_batches(5, 1, 2, 50, 5, 5).grad != sample_batches(5, 1, 3, 50, 5, 5).grad);
    CHECK(sample_batches(5, 1, 2, 50, 5, 5).grad != sample_batches(5, 2, 2, 50, 5, 5).grad);
  }
  SUBCASE("inclusion frequency over 1e5 draws") {
    const std::size_t C = 10, G = 3, S = 6, draws = 100000;
    std::vector<double> g(C, 0.0), h(C, 0.0);
    for (std::size_t k = 0; k < draws; ++k) {
      auto b = sample_batches(99, 0, k, C, G, S);
      for (auto i : b.grad) g[i] += 1;
      for (auto i : b.hess) h[i] += 1;
    }
    auto within = [&](const std::vector<double>& counts, double p) {
      const double sigma = std::sqrt(draws * p * (1 - p));
      for (double c : counts) CHECK(std::abs(c - draws * p) <= 3 * sigma);
    };
    within(g, 0.3);
    within(h, 0.6);
  }
  SUBCASE("out of range") {
    Rng a(1), b(2);
    CHECK_THROWS_AS(sample_batches(a, b, 5, 6, 1), ParameterError);
    CHECK_THROWS_AS(sample_batches(a, b, 5, 1, 0), ParameterError);
  }
}

TEST_CASE("local step") {
  SUBCASE("zero right-hand side is a fixed point") {
    auto agents = blob_agents(1, 6, 3, 0.1, 4);
    std::mt19937_64 rng(1);
    AgentState st;
    st.x = random_vector(3, rng);
    st.y = random_vector(3, rng);
    st.q = -local_grad(st.x, agents[0]) - 0.7 * st.y;
    auto x1 = local_step(0, st, agents[0], full_batches(6), ProximalBlock::scaled_identity(2.0), 0.7);
    CHECK((x1 - st.x).norm() <= 1e-15);
  }
  SUBCASE("scalar arithmetic: h = 1, D = 3, rhs = 8 moves x by 2") {
    auto ds = flat(1, 1.0);
    AgentState st;
    st.x = Vector::Constant(1, 8.0);
    st.y = Vector::Zero(1);
    st.q = Vector::Zero(1);
    auto x1 = local_step(0, st, ds, full_batches(1), ProximalBlock::scaled_identity(3.0), 1.0);
    CHECK(x1[0] == doctest::Approx(6.0).epsilon(1e-15));
  }
  SUBCASE("agrees with a dense inverse") {
    auto agents = blob_agents(1, 10, 6, 0.05, 8);
    std::mt19937_64 rng(2);
    for (int t = 0; t < 20; ++t) {
      AgentState st;
      st.x = random_vector(6, rng);
      st.y = random_vector(6, rng);
      st.q = random_vector(6, rng);
      Matrix B = Matrix::Random(6, 6);
      Matrix Dm = B * B.transpose() + Matrix::Identity(6, 6);
      auto D = ProximalBlock::dense(Dm);
      BatchIndices b{{1, 4, 7}, {0, 2}};
      auto x1 = local_step(0, st, agents[0], b, D, 0.5);
      Matrix system = batch_hess(st.x, agents[0], b.hess).dense() + Dm;
      Vector rhs = batch_grad(st.x, agents[0], b.grad) + 0.5 * st.y + st.q;
      Vector oracle = st.x - system.inverse() * rhs;
      CHECK(rel_err(x1, oracle) <= 1e-10);
    }
  }
  SUBCASE("non positive definite system names the agent") {
    auto ds = flat(2, 0.1);
    AgentState st{Vector::Ones(2), Vector::Zero(2), Vector::Zero(2), {}, {}};
    Matrix neg = -Matrix::Identity(2, 2);
    try {
      local_step(7, st, ds, full_batches(1), ProximalBlock::dense(neg), 1.0);
      FAIL("expected ConfigurationError");
    } catch (const ConfigurationError& e) {
      CHECK(std::string(e.what()).find("agent 7") != std::string::npos);
    }
  }
}

TEST_CASE("exchange and dual update") {
  SUBCASE("consensus leaves q unchanged") {
    Vector c = Vector::Constant(2, 0.3);
    auto s = init_network_at(ring(4), {c, c, c, c}, {Vector::Ones(2), -Vector::Ones(2), Vector::Zero(2), Vector::Zero(2)});
    auto before = s;
    exchange_and_dual_update(s, ring(4), 2.0);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(s.agents[i].y.isZero(0));
      CHECK(s.agents[i].q == before.agents[i].q);
    }
    CHECK(s.comm_scalars == before.comm_scalars + 2 * 4 * 2);
  }
  SUBCASE("two agents: q1 += beta v, q2 -= beta v") {
    Vector v(2);
    v << 1.5, -0.5;
    auto s = init_network_at(path(2), {v, Vector::Zero(2)}, {Vector::Zero(2), Vector::Zero(2)});
    exchange_and_dual_update(s, path(2), 0.4);
    CHECK(rel_err(s.agents[0].q, 0.4 * v) <= 1e-16);
    CHECK(rel_err(s.agents[1].q, -0.4 * v) <= 1e-16);
  }
  SUBCASE("disagreement sums to zero") {
    std::mt19937_64 rng(3);
    auto topo = laplacian_weights(build_random_connected_graph(6, 3.0, 1), 0.8);
    std::vector<Vector> x, q(6, Vector::Zero(3));
    for (int i = 0; i < 6; ++i) x.push_back(random_vector(3, rng));
    auto s = init_network_at(topo, x, q);
    Vector ysum = Vector::Zero(3);
    for (const auto& a : s.agents) ysum += a.y;
    CHECK(ysum.norm() <= 1e-14);
  }
}

TEST_CASE("proximal recipe") {
  SmoothnessBounds b{{0.1, 0.1}, {1.0, 2.0}};
  auto D = choose_D(b, 1.0, 2.0, SpectralSummary{1.0, 3.0});
  REQUIRE(D.size() == 2);
  CHECK(D[0].alpha() == 5.5);
  const double bound = recipe_mu_lower_bound(b, 0.5, 0.1);
  CHECK(bound == doctest::Approx((2.0 - 0.3) / 2 + 2.0 + 1.9 * 1.9 / 0.4));
  CHECK_THROWS_AS(choose_D(b, 1.0, bound * 0.99, SpectralSummary{1.0, 3.0}, RecipeCheck{0.5, 0.1}),
                  ConfigurationError);
  CHECK_NOTHROW(choose_D(b, 1.0, bound * 1.01, SpectralSummary{1.0, 3.0}, RecipeCheck{0.5, 0.1}));

  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 1.0;
  CHECK_THROWS_AS(ProximalBlock::dense(asym), ParameterError);
  CHECK_THROWS_AS(explicit_D({Matrix::Identity(2, 2)}, 2, 2), ParameterError);
  CHECK_THROWS_AS(explicit_D({Matrix::Identity(3, 3), Matrix::Identity(3, 3)}, 2, 2), ParameterError);
}

TEST_CASE("engine determinism and accounting") {
  auto topo = laplacian_weights(build_random_connected_graph(6, 3.0, 4));
  auto agents = blob_agents(6, 12, 5, 0.2, 6);
  const std::uint64_t per_round = 2 * topo.graph().num_edges() * 5;

  for (auto algo : {Algorithm::st_sopro, Algorithm::sopro, Algorithm::dsgd, Algorithm::dsgt}) {
    CAPTURE(to_string(algo));
    auto c = second_order(algo, 4, 3);
    c.step_size = 0.05;
    auto serial_cfg = c;
    serial_cfg.execution = ExecutionPolicy::serial;
    auto parallel_cfg = c;
    parallel_cfg.execution = ExecutionPolicy::parallel;

    std::vector<std::vector<Vector>> serial_xs, parallel_xs;
    std::vector<std::uint64_t> comm;
    run(topo, agents, serial_cfg, [&](const RoundView& v) {
      std::vector<Vector> xs;
      for (const auto& a : v.state.agents) xs.push_back(a.x);
      serial_xs.push_back(xs);
      comm.push_back(v.comm_scalars);
      return true;
    });
    run(topo, agents, parallel_cfg, [&](const RoundView& v) {
      std::vector<Vector> xs;
      for (const auto& a : v.state.agents) xs.push_back(a.x);
      parallel_xs.push_back(xs);
      return true;
    });
    REQUIRE(serial_xs.size() == c.max_iters + 1);
    for (std::size_t k = 0; k < serial_xs.size(); ++k) {
      for (std::size_t i = 0; i < 6; ++i) CHECK(serial_xs[k][i] == parallel_xs[k][i]);
    }
    for (std::size_t k = 0; k < comm.size(); ++k) {
      switch (algo) {
        case Algorithm::st_sopro:
        case Algorithm::sopro:
          CHECK(comm[k] == (k + 1) * per_round);
          break;
        case Algorithm::dsgd:
          CHECK(comm[k] == k * per_round);
          break;
        case Algorithm::dsgt:
          CHECK(comm[k] == 2 * k * per_round);
          break;
      }
    }
  }
}

TEST_CASE("callback can stop the run") {
  auto topo = ring(4);
  auto agents = blob_agents(4, 6, 3, 0.2, 1);
  auto c = second_order(Algorithm::sopro, 6, 6);
  std::size_t calls = 0;
  auto final_state = run(topo, agents, c, [&](const RoundView& v) {
    ++calls;
    return v.round < 5;
  });
  CHECK(calls == 6);
  CHECK(final_state.round == 5);
}

TEST_CASE("full-batch St-SoPro equals SoPro and matches the stacked reference") {
  auto topo = laplacian_weights(build_random_connected_graph(5, 2.4, 3), 0.6);
  auto agents = blob_agents(5, 10, 4, 0.1, 9);
  auto full = second_order(Algorithm::st_sopro, 10, 10);
  auto exact = second_order(Algorithm::sopro, 10, 10);
  auto a = Engine(topo, agents, full).run();
  auto b = Engine(topo, agents, exact).run();
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(a.agents[i].x == b.agents[i].x);
    CHECK(a.agents[i].q == b.agents[i].q);
  }

  auto sampled = second_order(Algorithm::st_sopro, 3, 4);
  Engine engine(topo, agents, sampled);
  auto state = engine.initial_state();
  std::vector<Vector> xs, qs;
  for (const auto& ag : state.agents) {
    xs.push_back(ag.x);
    qs.push_back(ag.q);
  }
  Vector x = stack(xs), q = stack(qs);
  for (std::size_t k = 0; k < 10; ++k) {
    std::vector<BatchIndices> batches;
    for (std::size_t i = 0; i < 5; ++i) batches.push_back(sample_batches(sampled.seed, i, k, 10, 3, 4));
    stacked_reference_round(x, q, topo.matrix(), agents, batches, engine.proximal_blocks(), sampled.beta);
    engine.step(state);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(rel_err(state.agents[i].x, Vector(x.segment(i * 4, 4))) <= 1e-10);
      CHECK(rel_err(state.agents[i].q, Vector(q.segment(i * 4, 4))) <= 1e-10);
    }
  }
}

TEST_CASE("proximal systems stay positive definite along a run") {
  auto topo = ring(5);
  auto agents = blob_agents(5, 15, 4, 0.05, 12);
  auto c = second_order(Algorithm::st_sopro, 5, 5);
  c.max_iters = 100;
  Engine engine(topo, agents, c);
  const double alpha = engine.proximal_blocks().front().alpha();
  run(topo, agents, c, [&](const RoundView& v) {
    for (std::size_t i = 0; i < 5; ++i) {
      auto b = sample_batches(c.seed, i, v.round, 15, 5, 5);
      Matrix system = batch_hess(v.state.agents[i].x, agents[i], b.hess).dense();
      engine.proximal_blocks()[i].add_to(system);
      Eigen::SelfAdjointEigenSolver<Matrix> es(system);
      CHECK(es.eigenvalues().minCoeff() >= alpha + agents[i].lambda() - 1e-10);
    }
    return true;
  });
}
