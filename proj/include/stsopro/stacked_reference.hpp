#pragma once

#include <span>
#include <vector>

#include "stsopro/linalg.hpp"
#include "stsopro/loss.hpp"
#include "stsopro/optimizer.hpp"
#include "stsopro/topology.hpp"

namespace stsopro {

/// Stack per-agent blocks into one N*d vector and back.
Vector stack(std::span<const Vector> blocks);
std::vector<Vector> unstack(const Vector& stacked, std::size_t num_agents);

/// Dense W = P (x) I_d.
Matrix kron_identity(const Matrix& P, std::size_t dim);

/// Serial reference for one second-order round in stacked form:
///   x+ = x - (h(x) + D)^{-1} (g(x) + beta W x + q),   q+ = q + beta W x+
/// with W and the block-diagonal system materialised as dense N*d matrices and
/// solved by LU. Slow; kept to check the distributed kernels.
void stacked_reference_round(Vector& x, Vector& q, const Matrix& P,
                             std::span<const LocalDataset> datasets,
                             std::span<const BatchIndices> batches,
                             std::span<const ProximalBlock> proximal, double beta);

}  // namespace stsopro
