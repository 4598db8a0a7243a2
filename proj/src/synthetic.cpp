#include "stsopro/synthetic.hpp"

#include <cmath>
#include <random>
#include <vector>

#include "stsopro/errors.hpp"
#include "stsopro/rng.hpp"

namespace stsopro {

LabeledData make_gaussian_blobs(std::size_t count, std::size_t dim, double separation,
                                double noise, std::uint64_t seed) {
  if (count == 0 || dim == 0) throw ParameterError("blobs need count > 0 and dim > 0");
  Rng rng = make_stream(seed, 0, 0, StreamPurpose::data);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  Vector direction(static_cast<Eigen::Index>(dim));
  for (auto& v : direction) v = gauss(rng);
  direction.normalize();

  const double spread = noise / std::sqrt(static_cast<double>(dim));
  LabeledData out;
  out.dim = dim;
  out.samples.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const int label = coin(rng) ? 1 : -1;
    Vector a = label * separation * direction;
    for (auto& v : a) v += spread * gauss(rng);
    out.samples.push_back({SparseVector::from_dense(a), label});
  }
  return out;
}

LabeledData make_categorical(std::size_t count, std::size_t groups, std::size_t categories,
                             double signal, std::uint64_t seed, double concentration) {
  if (count == 0 || groups == 0 || categories < 2) {
    throw ParameterError("categorical data needs count > 0, groups > 0, categories >= 2");
  }
  if (!(signal >= 0.0 && signal <= 1.0)) throw ParameterError("signal must lie in [0, 1]");
  if (!(concentration > 0.0 && std::isfinite(concentration))) {
    throw ParameterError("concentration must be positive");
  }
  Rng rng = make_stream(seed, 0, 0, StreamPurpose::data);
  std::gamma_distribution<double> weight(concentration, 1.0);
  std::bernoulli_distribution coin(0.5);

  // weights[class][group][category], class 0 is label +1
  auto random_simplex = [&]() {
    std::vector<double> w(categories);
    for (auto& v : w) v = weight(rng);
    return w;
  };
  std::vector<std::vector<std::discrete_distribution<std::size_t>>> draw(2);
  for (std::size_t g = 0; g < groups; ++g) {
    const auto shared = random_simplex();
    for (std::size_t c = 0; c < 2; ++c) {
      auto own = random_simplex();
      double s_shared = 0.0;
      double s_own = 0.0;
      for (std::size_t k = 0; k < categories; ++k) {
        s_shared += shared[k];
        s_own += own[k];
      }
      for (std::size_t k = 0; k < categories; ++k) {
        own[k] = (1.0 - signal) * shared[k] / s_shared + signal * own[k] / s_own;
      }
      draw[c].emplace_back(own.begin(), own.end());
    }
  }

  LabeledData out;
  out.dim = groups * categories;
  out.samples.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const int label = coin(rng) ? 1 : -1;
    auto& dists = draw[label == 1 ? 0 : 1];
    Sample s;
    s.label = label;
    for (std::size_t g = 0; g < groups; ++g) {
      s.features.index.push_back(static_cast<std::uint32_t>(g * categories + dists[g](rng)));
      s.features.value.push_back(1.0);
    }
    out.samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace stsopro
