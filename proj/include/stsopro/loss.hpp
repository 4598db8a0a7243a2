#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "stsopro/linalg.hpp"

namespace stsopro {

/// Sparse feature vector with strictly increasing 0-based indices.
struct SparseVector {
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  std::size_t nnz() const noexcept { return index.size(); }
  double dot(const Vector& x) const;
  double squared_norm() const;
  /// y += scale * this
  void add_to(Vector& y, double scale) const;
  Vector to_dense(std::size_t dim) const;

  static SparseVector from_dense(const Vector& dense);
};

/// One labelled example; label is exactly +1 or -1.
struct Sample {
  SparseVector features;
  int label = 1;
};

/// A parsed or generated pool of samples sharing one dimension.
struct LabeledData {
  std::vector<Sample> samples;
  std::size_t dim = 0;
};

/// Agent-local samples with the l2 regularisation weight lambda.
class LocalDataset {
 public:
  LocalDataset(std::vector<Sample> samples, std::size_t dim, double lambda);

  std::size_t size() const noexcept { return samples_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  double lambda() const noexcept { return lambda_; }
  const Sample& operator[](std::size_t j) const { return samples_[j]; }
  const std::vector<Sample>& samples() const noexcept { return samples_; }

 private:
  std::vector<Sample> samples_;
  std::size_t dim_;
  double lambda_;
};

/// lambda * I + sum_k weight_k a_k a_k^T.
///
/// Directions point into the dataset the Hessian was built from; the dataset
/// must outlive this object.
struct LowRankHessian {
  std::size_t dim = 0;
  double shift = 0.0;
  std::vector<double> weights;
  std::vector<const SparseVector*> directions;

  Matrix dense() const;
  /// m += this (m must be dim x dim)
  void add_to(Matrix& m) const;
  Vector apply(const Vector& v) const;
};

// Numerically stable logistic helpers.
double logistic(double t) noexcept;   // 1 / (1 + exp(-t))
double softplus(double t) noexcept;   // log(1 + exp(t))

/// lambda/2 ||x||^2 + log(1 + exp(-b a^T x))
double sample_loss(const Vector& x, const Sample& s, double lambda);
/// lambda x - b * logistic(-b a^T x) * a
Vector sample_grad(const Vector& x, const Sample& s, double lambda);
/// lambda I + w a a^T with w = logistic(z)(1 - logistic(z)), z = a^T x
LowRankHessian sample_hess(const Vector& x, const Sample& s, double lambda);

/// Means over `indices` (0-based, nonempty, in range).
Vector batch_grad(const Vector& x, const LocalDataset& ds, std::span<const std::size_t> indices);
LowRankHessian batch_hess(const Vector& x, const LocalDataset& ds,
                          std::span<const std::size_t> indices);

/// f_i and its exact derivatives (means over every local sample).
double local_loss(const Vector& x, const LocalDataset& ds);
Vector local_grad(const Vector& x, const LocalDataset& ds);
LowRankHessian local_hess(const Vector& x, const LocalDataset& ds);

struct AgentSmoothness {
  double m = 0.0;
  double M = 0.0;
};

/// Per-agent curvature bounds m_i <= eig(hess l_ij) <= M_i and M = max_i M_i.
struct SmoothnessBounds {
  std::vector<double> m;
  std::vector<double> M;

  std::size_t num_agents() const noexcept { return m.size(); }
  double max_M() const;
  double min_m() const;
};

/// m_i = lambda, M_i = lambda + max_j ||a_ij||^2 / 4.
AgentSmoothness smoothness(const LocalDataset& ds);
SmoothnessBounds network_smoothness(std::span<const LocalDataset> datasets);

/// max over agents i, samples j and probes x of ||grad l_ij(x) - grad f_i(x)||^2.
double sigma_sq_estimate(std::span<const LocalDataset> datasets, std::span<const Vector> probes);

/// LIBSVM text: "<label> <idx>:<val> ...", 1-based strictly increasing indices.
/// Labels from {-1,+1}, {1,2} (2 -> -1) or {0,1} (0 -> -1); anything else is a
/// ParseError. The dimension is max(max index, min_dim).
LabeledData parse_libsvm(std::istream& in, std::size_t min_dim = 0);

struct Partition {
  std::vector<LocalDataset> agents;
  std::vector<Sample> test;
  std::size_t dim = 0;
};

/// Seeded uniform permutation split into `num_agents` contiguous blocks of
/// `per_agent` samples; the remainder is the test set.
Partition partition(const LabeledData& data, std::size_t num_agents, std::size_t per_agent,
                    double lambda, std::uint64_t seed);

}  // namespace stsopro
