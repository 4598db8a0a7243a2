#pragma once

#include <cstddef>
#include <initializer_list>
#include <random>
#include <vector>

#include "stsopro/linalg.hpp"
#include "stsopro/loss.hpp"
#include "stsopro/synthetic.hpp"
#include "stsopro/topology.hpp"

namespace testing {

using namespace stsopro;

inline Sample dense_sample(std::initializer_list<double> a, int label) {
  Vector v(static_cast<Eigen::Index>(a.size()));
  Eigen::Index k = 0;
  for (double x : a) v[k++] = x;
  return Sample{SparseVector::from_dense(v), label};
}

inline Vector random_vector(std::size_t d, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Vector v(static_cast<Eigen::Index>(d));
  for (auto& x : v) x = n(rng);
  return v;
}

inline std::vector<LocalDataset> blob_agents(std::size_t n, std::size_t C, std::size_t d,
                                             double lambda, std::uint64_t seed) {
  auto data = make_gaussian_blobs(n * C, d, 1.0, 0.5, seed);
  return partition(data, n, C, lambda, seed).agents;
}

inline WeightedLaplacian ring(std::size_t n, double p = 1.0) {
  std::vector<EdgeKey> edges;
  for (std::size_t i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
  return laplacian_weights(Graph(n, edges), p);
}

inline WeightedLaplacian path(std::size_t n, double p = 1.0) {
  std::vector<EdgeKey> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  return laplacian_weights(Graph(n, edges), p);
}

inline double rel_err(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

inline double rel_err(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace testing
