#include "stsopro/loss.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <set>
#include <string>
#include <string_view>

#include "stsopro/errors.hpp"
#include "stsopro/rng.hpp"

namespace stsopro {

double SparseVector::dot(const Vector& x) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < index.size(); ++k) acc += value[k] * x(index[k]);
  return acc;
}

double SparseVector::squared_norm() const {
  double acc = 0.0;
  for (double v : value) acc += v * v;
  return acc;
}

void SparseVector::add_to(Vector& y, double scale) const {
  for (std::size_t k = 0; k < index.size(); ++k) y(index[k]) += scale * value[k];
}

Vector SparseVector::to_dense(std::size_t dim) const {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(dim));
  add_to(out, 1.0);
  return out;
}

SparseVector SparseVector::from_dense(const Vector& dense) {
  SparseVector out;
  for (Eigen::Index k = 0; k < dense.size(); ++k) {
    if (dense(k) != 0.0) {
      out.index.push_back(static_cast<std::uint32_t>(k));
      out.value.push_back(dense(k));
    }
  }
  return out;
}

LocalDataset::LocalDataset(std::vector<Sample> samples, std::size_t dim, double lambda)
    : samples_(std::move(samples)), dim_(dim), lambda_(lambda) {
  if (samples_.empty()) throw ParameterError("local dataset must hold at least one sample");
  if (!(lambda_ > 0.0)) throw ParameterError("regularisation lambda must be positive");
  for (const auto& s : samples_) {
    if (s.label != 1 && s.label != -1) throw ParameterError("labels must be +1 or -1");
    if (!s.features.index.empty() && s.features.index.back() >= dim_) {
      throw ParameterError("sample feature index exceeds dataset dimension");
    }
  }
}

Matrix LowRankHessian::dense() const {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  add_to(m);
  return m;
}

void LowRankHessian::add_to(Matrix& m) const {
  m.diagonal().array() += shift;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double w = weights[k];
    if (w == 0.0) continue;
    const SparseVector& a = *directions[k];
    for (std::size_t r = 0; r < a.nnz(); ++r) {
      const double wr = w * a.value[r];
      for (std::size_t c = 0; c < a.nnz(); ++c) m(a.index[r], a.index[c]) += wr * a.value[c];
    }
  }
}

Vector LowRankHessian::apply(const Vector& v) const {
  Vector out = shift * v;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    directions[k]->add_to(out, weights[k] * directions[k]->dot(v));
  }
  return out;
}

double logistic(double t) noexcept {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double softplus(double t) noexcept { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

namespace {

void check_dim(const Vector& x, std::size_t dim) {
  if (static_cast<std::size_t>(x.size()) != dim) {
    throw ParameterError("dimension mismatch: x has " + std::to_string(x.size()) +
                         " entries, data has " + std::to_string(dim));
  }
}

void check_sample_dim(const Vector& x, const Sample& s) {
  if (!s.features.index.empty() && s.features.index.back() >= x.size()) {
    throw ParameterError("dimension mismatch: sample index " +
                         std::to_string(s.features.index.back()) + " outside x of size " +
                         std::to_string(x.size()));
  }
}

void check_indices(const LocalDataset& ds, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ParameterError("batch index set is empty");
  for (std::size_t j : indices) {
    if (j >= ds.size()) {
      throw ParameterError("batch index " + std::to_string(j) + " out of range [0," +
                           std::to_string(ds.size()) + ")");
    }
  }
}

}  // namespace

double sample_loss(const Vector& x, const Sample& s, double lambda) {
  check_sample_dim(x, s);
  const double margin = s.label * s.features.dot(x);
  return 0.5 * lambda * x.squaredNorm() + softplus(-margin);
}

Vector sample_grad(const Vector& x, const Sample& s, double lambda) {
  check_sample_dim(x, s);
  const double margin = s.label * s.features.dot(x);
  Vector g = lambda * x;
  s.features.add_to(g, -s.label * logistic(-margin));
  return g;
}

LowRankHessian sample_hess(const Vector& x, const Sample& s, double lambda) {
  check_sample_dim(x, s);
  const double p = logistic(s.features.dot(x));
  LowRankHessian h;
  h.dim = static_cast<std::size_t>(x.size());
  h.shift = lambda;
  h.weights.push_back(p * (1.0 - p));
  h.directions.push_back(&s.features);
  return h;
}

Vector batch_grad(const Vector& x, const LocalDataset& ds, std::span<const std::size_t> indices) {
  check_dim(x, ds.dim());
  check_indices(ds, indices);
  const double inv = 1.0 / static_cast<double>(indices.size());
  Vector g = ds.lambda() * x;
  for (std::size_t j : indices) {
    const Sample& s = ds[j];
    const double margin = s.label * s.features.dot(x);
    s.features.add_to(g, -inv * s.label * logistic(-margin));
  }
  return g;
}

LowRankHessian batch_hess(const Vector& x, const LocalDataset& ds,
                          std::span<const std::size_t> indices) {
  check_dim(x, ds.dim());
  check_indices(ds, indices);
  const double inv = 1.0 / static_cast<double>(indices.size());
  LowRankHessian h;
  h.dim = ds.dim();
  h.shift = ds.lambda();
  h.weights.reserve(indices.size());
  h.directions.reserve(indices.size());
  for (std::size_t j : indices) {
    const Sample& s = ds[j];
    const double p = logistic(s.features.dot(x));
    h.weights.push_back(inv * p * (1.0 - p));
    h.directions.push_back(&s.features);
  }
  return h;
}

namespace {
std::vector<std::size_t> all_indices(const LocalDataset& ds) {
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}
}  // namespace

double local_loss(const Vector& x, const LocalDataset& ds) {
  check_dim(x, ds.dim());
  double acc = 0.0;
  for (const auto& s : ds.samples()) acc += softplus(-s.label * s.features.dot(x));
  return 0.5 * ds.lambda() * x.squaredNorm() + acc / static_cast<double>(ds.size());
}

Vector local_grad(const Vector& x, const LocalDataset& ds) {
  const auto idx = all_indices(ds);
  return batch_grad(x, ds, idx);
}

LowRankHessian local_hess(const Vector& x, const LocalDataset& ds) {
  const auto idx = all_indices(ds);
  return batch_hess(x, ds, idx);
}

double SmoothnessBounds::max_M() const {
  if (M.empty()) throw ParameterError("empty smoothness bounds");
  return *std::max_element(M.begin(), M.end());
}

double SmoothnessBounds::min_m() const {
  if (m.empty()) throw ParameterError("empty smoothness bounds");
  return *std::min_element(m.begin(), m.end());
}

AgentSmoothness smoothness(const LocalDataset& ds) {
  double widest = 0.0;
  for (const auto& s : ds.samples()) widest = std::max(widest, s.features.squared_norm());
  return {ds.lambda(), ds.lambda() + 0.25 * widest};
}

SmoothnessBounds network_smoothness(std::span<const LocalDataset> datasets) {
  SmoothnessBounds out;
  for (const auto& ds : datasets) {
    const auto b = smoothness(ds);
    out.m.push_back(b.m);
    out.M.push_back(b.M);
  }
  return out;
}

double sigma_sq_estimate(std::span<const LocalDataset> datasets, std::span<const Vector> probes) {
  if (probes.empty()) throw ParameterError("sigma^2 estimate needs at least one probe point");
  double worst = 0.0;
  for (const auto& ds : datasets) {
    for (const auto& x : probes) {
      const Vector mean = local_grad(x, ds);
      for (const auto& s : ds.samples()) {
        worst = std::max(worst, (sample_grad(x, s, ds.lambda()) - mean).squaredNorm());
      }
    }
  }
  return worst;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view token, std::size_t line, const char* what) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(v)) {
    throw ParseError(line, std::string("malformed ") + what + " \"" + std::string(token) + "\"");
  }
  return v;
}

}  // namespace

LabeledData parse_libsvm(std::istream& in, std::size_t min_dim) {
  struct RawRow {
    double label;
    std::size_t line;
    SparseVector features;
  };
  std::vector<RawRow> rows;
  std::string text;
  std::size_t line_no = 0;
  std::size_t max_index = 0;
  while (std::getline(in, text)) {
    ++line_no;
    std::string_view line = text;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    RawRow row{0.0, line_no, {}};
    std::size_t pos = 0;
    bool first = true;
    std::int64_t previous = 0;
    while (pos < line.size()) {
      const auto end = std::min(line.find_first_of(" \t", pos), line.size());
      const std::string_view token = line.substr(pos, end - pos);
      pos = line.find_first_not_of(" \t", end);
      if (pos == std::string_view::npos) pos = line.size();
      if (first) {
        row.label = parse_double(token, line_no, "label");
        first = false;
        continue;
      }
      const auto colon = token.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError(line_no, "expected idx:val, got \"" + std::string(token) + "\"");
      }
      const std::string_view idx_text = token.substr(0, colon);
      std::int64_t idx = 0;
      auto [ptr, ec] = std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), idx);
      if (ec != std::errc() || ptr != idx_text.data() + idx_text.size() || idx < 1) {
        throw ParseError(line_no, "malformed feature index \"" + std::string(idx_text) + "\"");
      }
      if (idx <= previous) {
        throw ParseError(line_no, "feature indices must be strictly increasing (" +
                                      std::to_string(idx) + " after " +
                                      std::to_string(previous) + ")");
      }
      previous = idx;
      const double value = parse_double(token.substr(colon + 1), line_no, "feature value");
      max_index = std::max(max_index, static_cast<std::size_t>(idx));
      if (value != 0.0) {
        row.features.index.push_back(static_cast<std::uint32_t>(idx - 1));
        row.features.value.push_back(value);
      }
    }
    rows.push_back(std::move(row));
  }

  std::set<double> labels;
  for (const auto& r : rows) labels.insert(r.label);
  auto subset_of = [&](std::initializer_list<double> allowed) {
    return std::all_of(labels.begin(), labels.end(), [&](double l) {
      return std::find(allowed.begin(), allowed.end(), l) != allowed.end();
    });
  };
  double negative = 0.0;
  if (subset_of({-1.0, 1.0})) {
    negative = -1.0;
  } else if (subset_of({1.0, 2.0})) {
    negative = 2.0;
  } else if (subset_of({0.0, 1.0})) {
    negative = 0.0;
  } else {
    for (const auto& r : rows) {
      if (r.label != 1.0 && r.label != -1.0 && r.label != 2.0 && r.label != 0.0) {
        throw ParseError(r.line, "unmappable label " + std::to_string(r.label));
      }
    }
    throw ParseError(rows.front().line, "labels mix incompatible conventions");
  }

  LabeledData out;
  out.dim = std::max(max_index, min_dim);
  out.samples.reserve(rows.size());
  for (auto& r : rows) {
    out.samples.push_back({std::move(r.features), r.label == negative ? -1 : 1});
  }
  return out;
}

Partition partition(const LabeledData& data, std::size_t num_agents, std::size_t per_agent,
                    double lambda, std::uint64_t seed) {
  if (num_agents == 0 || per_agent == 0) {
    throw ParameterError("partition needs at least one agent and one sample per agent");
  }
  if (num_agents * per_agent > data.samples.size()) {
    throw ParameterError("insufficient samples: " + std::to_string(num_agents) + " x " +
                         std::to_string(per_agent) + " requested, " +
                         std::to_string(data.samples.size()) + " available");
  }
  Rng rng = make_stream(seed, 0, 0, StreamPurpose::partition);
  std::vector<std::size_t> order(data.samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  Partition out;
  out.dim = data.dim;
  out.agents.reserve(num_agents);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < num_agents; ++i) {
    std::vector<Sample> local;
    local.reserve(per_agent);
    for (std::size_t j = 0; j < per_agent; ++j) local.push_back(data.samples[order[cursor++]]);
    out.agents.emplace_back(std::move(local), data.dim, lambda);
  }
  for (; cursor < order.size(); ++cursor) out.test.push_back(data.samples[order[cursor]]);
  return out;
}

}  // namespace stsopro
