#include "stsopro/stacked_reference.hpp"

#include <Eigen/LU>

#include "stsopro/errors.hpp"

namespace stsopro {

Vector stack(std::span<const Vector> blocks) {
  if (blocks.empty()) return {};
  const auto d = blocks.front().size();
  Vector out(d * static_cast<Eigen::Index>(blocks.size()));
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    out.segment(static_cast<Eigen::Index>(i) * d, d) = blocks[i];
  }
  return out;
}

std::vector<Vector> unstack(const Vector& stacked, std::size_t num_agents) {
  if (num_agents == 0 || stacked.size() % static_cast<Eigen::Index>(num_agents) != 0) {
    throw ParameterError("stacked vector does not split into equal blocks");
  }
  const auto d = stacked.size() / static_cast<Eigen::Index>(num_agents);
  std::vector<Vector> out(num_agents);
  for (std::size_t i = 0; i < num_agents; ++i) {
    out[i] = stacked.segment(static_cast<Eigen::Index>(i) * d, d);
  }
  return out;
}

Matrix kron_identity(const Matrix& P, std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  Matrix W = Matrix::Zero(P.rows() * d, P.cols() * d);
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    for (Eigen::Index j = 0; j < P.cols(); ++j) {
      if (P(i, j) != 0.0) W.block(i * d, j * d, d, d).diagonal().setConstant(P(i, j));
    }
  }
  return W;
}

void stacked_reference_round(Vector& x, Vector& q, const Matrix& P,
                             std::span<const LocalDataset> datasets,
                             std::span<const BatchIndices> batches,
                             std::span<const ProximalBlock> proximal, double beta) {
  const std::size_t n = datasets.size();
  const std::size_t dim = datasets.front().dim();
  const auto d = static_cast<Eigen::Index>(dim);
  const Matrix W = kron_identity(P, dim);
  const auto xs = unstack(x, n);

  Matrix system = Matrix::Zero(x.size(), x.size());
  Vector g(x.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto off = static_cast<Eigen::Index>(i) * d;
    g.segment(off, d) = batch_grad(xs[i], datasets[i], batches[i].grad);
    Matrix block = batch_hess(xs[i], datasets[i], batches[i].hess).dense();
    proximal[i].add_to(block);
    system.block(off, off, d, d) = block;
  }
  x -= system.partialPivLu().solve(g + beta * (W * x) + q);
  q += beta * (W * x);
}

}  // namespace stsopro
