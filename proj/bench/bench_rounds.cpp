// One second-order round: OpenMP engine vs serial engine vs dense stacked reference.

#include <benchmark/benchmark.h>

#include <vector>

#include "stsopro/engine.hpp"
#include "stsopro/stacked_reference.hpp"
#include "stsopro/synthetic.hpp"

using namespace stsopro;

namespace {

struct Fixture {
  std::vector<LocalDataset> agents;
  WeightedLaplacian topology;
  RunConfig config;
};

Fixture make_fixture(std::size_t n, std::size_t dim, ExecutionPolicy policy) {
  const std::size_t per_agent = 200;
  auto data = make_gaussian_blobs(n * per_agent, dim, 1.0, 1.0, 7);
  auto split = partition(data, n, per_agent, 0.05, 7);
  auto graph = build_random_connected_graph(n, 4.0, 7);
  RunConfig config;
  config.algorithm = Algorithm::st_sopro;
  config.batch_g = 40;
  config.batch_s = 40;
  config.execution = policy;
  return {std::move(split.agents), laplacian_weights(graph), config};
}

void engine_round(benchmark::State& st, ExecutionPolicy policy) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto dim = static_cast<std::size_t>(st.range(1));
  auto f = make_fixture(n, dim, policy);
  const Engine engine(f.topology, f.agents, f.config);
  auto state = engine.initial_state();
  for (auto _ : st) {
    engine.step(state);
    benchmark::DoNotOptimize(state.agents.front().x.data());
  }
}

void BM_EngineParallel(benchmark::State& st) { engine_round(st, ExecutionPolicy::parallel); }
void BM_EngineSerial(benchmark::State& st) { engine_round(st, ExecutionPolicy::serial); }

void BM_StackedReference(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto dim = static_cast<std::size_t>(st.range(1));
  auto f = make_fixture(n, dim, ExecutionPolicy::serial);
  const Engine engine(f.topology, f.agents, f.config);
  const auto init = engine.initial_state();
  std::vector<Vector> xs, qs;
  for (const auto& a : init.agents) {
    xs.push_back(a.x);
    qs.push_back(a.q);
  }
  Vector x = stack(xs), q = stack(qs);
  std::size_t round = 0;
  for (auto _ : st) {
    std::vector<BatchIndices> batches;
    for (std::size_t i = 0; i < n; ++i) {
      batches.push_back(sample_batches(f.config.seed, i, round, f.agents[i].size(),
                                       f.config.batch_g, f.config.batch_s));
    }
    stacked_reference_round(x, q, f.topology.matrix(), f.agents, batches,
                            engine.proximal_blocks(), f.config.beta);
    ++round;
    benchmark::DoNotOptimize(x.data());
  }
}

}  // namespace

BENCHMARK(BM_EngineParallel)->Args({16, 20})->Args({64, 20})->Args({64, 100});
BENCHMARK(BM_EngineSerial)->Args({16, 20})->Args({64, 20})->Args({64, 100});
BENCHMARK(BM_StackedReference)->Args({16, 20})->Args({64, 20});

BENCHMARK_MAIN();
