#pragma once

#include <cstddef>
#include <cstdint>

#include "stsopro/loss.hpp"

namespace stsopro {

/// Two Gaussian blobs: a = b * separation * u + noise * z with u a fixed random
/// unit direction and z ~ N(0, I / dim). Labels are balanced coin flips.
LabeledData make_gaussian_blobs(std::size_t count, std::size_t dim, double separation,
                                double noise, std::uint64_t seed);

/// One-hot categorical data in the style of the mushrooms set: `groups`
/// attributes with `categories` values each, every sample has exactly one
/// active (value 1) feature per attribute. Each class draws attribute values
/// from its own random distribution; `signal` in [0, 1] blends those class
/// distributions away from a shared one. Value frequencies are Dirichlet
/// draws with the given `concentration`; values below 1 give the long tail of
/// rare values seen in real categorical sets.
LabeledData make_categorical(std::size_t count, std::size_t groups, std::size_t categories,
                             double signal, std::uint64_t seed, double concentration = 1.0);

}  // namespace stsopro
