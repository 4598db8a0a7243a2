#include "stsopro/certificate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "stsopro/errors.hpp"

namespace stsopro {

double tau(std::size_t C, std::size_t G) {
  if (G < 1 || G > C) {
    throw ParameterError("tau needs 1 <= G <= C (got C=" + std::to_string(C) +
                         ", G=" + std::to_string(G) + ")");
  }
  const auto c = static_cast<double>(C);
  const auto g = static_cast<double>(G);
  return (c - g) / (c * g);
}

double zeta(double gamma, double m_fbar, std::size_t N, double M, double beta, double lambda_W) {
  const double n = static_cast<double>(N);
  return std::min(m_fbar / n - 2.0 * M * gamma,
                  beta * lambda_W / (2.0 * (1.0 + 1.0 / (gamma * gamma))));
}

StrongConvexity m_beta(double m_fbar, std::size_t N, double M, double beta, double lambda_W) {
  if (!(m_fbar > 0.0) || N == 0 || !(M > 0.0) || !(beta > 0.0) || !(lambda_W > 0.0)) {
    throw ParameterError("m_beta needs positive m_fbar, N, M, beta, lambda_W");
  }
  const double n = static_cast<double>(N);
  const double a3 = 4.0 * M * n;
  const double a2 = beta * n * lambda_W - 2.0 * m_fbar;
  const double a1 = 4.0 * M * n;
  const double a0 = -2.0 * m_fbar;
  auto cubic = [&](double g) { return ((a3 * g + a2) * g + a1) * g + a0; };

  double lo = 0.0;
  double hi = m_fbar / (2.0 * M * n);
  if (!(cubic(lo) < 0.0 && cubic(hi) > 0.0)) {
    std::ostringstream msg;
    msg << "cubic root not bracketed on (0, " << hi << "]: p(0)=" << cubic(lo)
        << ", p(hi)=" << cubic(hi);
    throw CertificationError(msg.str());
  }
  for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (cubic(mid) < 0.0 ? lo : hi) = mid;
  }
  const double gamma = 0.5 * (lo + hi);
  const double value = zeta(gamma, m_fbar, N, M, beta, lambda_W);
  if (!(value > 0.0) || !(gamma > 0.0 && gamma < m_fbar / (2.0 * M * n))) {
    throw CertificationError("m_beta is not positive at the cubic root");
  }
  return {value, gamma};
}

namespace {

bool all_scalar(std::span<const ProximalBlock> proximal) {
  return std::all_of(proximal.begin(), proximal.end(),
                     [](const ProximalBlock& b) { return b.is_scaled_identity(); });
}

// blockdiag(D_i) + diag(shift) (x) I_d + laplacian_coef * (P (x) I_d). When every
// D_i is alpha_i I the d identical copies decouple and the n x n matrix suffices.
Matrix assemble(std::span<const ProximalBlock> proximal, const Vector& shift,
                double laplacian_coef, const Matrix& P, std::size_t dim) {
  const auto n = P.rows();
  if (static_cast<std::size_t>(n) != proximal.size() || shift.size() != n) {
    throw ParameterError("certificate inputs disagree on the number of agents");
  }
  if (all_scalar(proximal)) {
    Matrix A = laplacian_coef * P;
    for (Eigen::Index i = 0; i < n; ++i) {
      A(i, i) += proximal[static_cast<std::size_t>(i)].alpha() + shift(i);
    }
    return A;
  }
  const auto d = static_cast<Eigen::Index>(dim);
  Matrix A = Matrix::Zero(n * d, n * d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (P(i, j) != 0.0) A.block(i * d, j * d, d, d).diagonal().array() += laplacian_coef * P(i, j);
    }
    auto block = A.block(i * d, i * d, d, d);
    Matrix Di = proximal[static_cast<std::size_t>(i)].as_matrix(dim);
    block += Di;
    block.diagonal().array() += shift(i);
  }
  return A;
}

double min_eigenvalue(const Matrix& A) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(A, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw InvariantError("eigensolver failed");
  return solver.eigenvalues()(0);
}

}  // namespace

ConditionResult check_D_condition(std::span<const ProximalBlock> proximal,
                                  const SmoothnessBounds& bounds, double eta_s, double m_beta,
                                  double beta, const Matrix& P, std::size_t dim) {
  if (!(eta_s > 0.0 && eta_s < 1.0)) throw ParameterError("eta_s must lie in (0, 1)");
  if (!(m_beta > 0.0)) throw ParameterError("m_beta must be positive");
  const auto n = static_cast<Eigen::Index>(bounds.num_agents());
  Vector shift(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = bounds.m[static_cast<std::size_t>(i)];
    const double M = bounds.M[static_cast<std::size_t>(i)];
    shift(i) = -(M / (2.0 * (1.0 - eta_s)) + (M - m) * (M - m) / (8.0 * eta_s * m_beta) +
                 0.5 * (M - 3.0 * m) + 0.5 * beta);
  }
  const double margin = min_eigenvalue(assemble(proximal, shift, -beta, P, dim));
  return {margin > 0.0, margin};
}

double kappa(double c0, double eta_s, std::span<const ProximalBlock> proximal,
             const SmoothnessBounds& bounds, double beta, const Matrix& P, std::size_t dim) {
  if (!(c0 > 0.0)) throw ParameterError("c0 must be positive");
  if (!(eta_s > 0.0 && eta_s < 1.0)) throw ParameterError("eta_s must lie in (0, 1)");
  const auto n = static_cast<Eigen::Index>(bounds.num_agents());
  Vector shift(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = bounds.m[static_cast<std::size_t>(i)];
    const double M = bounds.M[static_cast<std::size_t>(i)];
    // R contributes (m + M)/2 on top of D
    shift(i) = 0.5 * (m + M) - M / (2.0 * (1.0 - eta_s)) - (M - m) * (M - m) / (4.0 * c0) + m -
               M - 0.5 * beta;
  }
  return min_eigenvalue(assemble(proximal, shift, -beta, P, dim));
}

double DeltaTerms::min() const noexcept { return std::min({consensus, dual, primal}); }

namespace {

struct TermContext {
  const CertificateInputs& in;
  double m_beta;
  double norm_sq;  // ||Lambda_M + D||^2

  explicit TermContext(const CertificateInputs& inputs, double mb) : in(inputs), m_beta(mb) {
    double norm = 0.0;
    for (std::size_t i = 0; i < in.proximal.size(); ++i) {
      const double M = in.bounds.M[i];
      norm = std::max({norm, std::abs(M + in.proximal[i].min_eigenvalue()),
                       std::abs(M + in.proximal[i].max_eigenvalue())});
    }
    norm_sq = norm * norm;
  }

  double consensus(double c0) const {
    const double k = kappa(c0, in.eta_s, in.proximal, in.bounds, in.beta, in.P, in.dim);
    return in.beta * in.spectra.lambda_W * k / (2.0 * (1.0 + in.c1) * norm_sq);
  }

  double dual(double c2) const { return (1.0 - in.eta_s) / ((1.0 + 1.0 / in.c1) * (1.0 + c2)); }

  double primal(double c0, double c2) const {
    const double k = (1.0 + 1.0 / in.c1) * (1.0 + 1.0 / c2) / (in.beta * in.spectra.lambda_W);
    double widest = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < in.proximal.size(); ++i) {
      const double m = in.bounds.m[i];
      const double M = in.bounds.M[i];
      widest = std::max(widest, in.proximal[i].max_eigenvalue() + 0.5 * (m + M) + k * M * M);
    }
    return (2.0 * in.eta_s * m_beta - c0) / widest;
  }

  // The dual term decreases and the primal term increases in c2; the sup of
  // their minimum sits at the crossing. Bisection in log(c2).
  std::pair<double, double> crossing(double c0) const {
    double lo = -60.0;
    double hi = 60.0;
    auto gap = [&](double t) {
      const double c2 = std::exp(t);
      return dual(c2) - primal(c0, c2);
    };
    if (gap(lo) <= 0.0) return {std::exp(lo), std::min(dual(std::exp(lo)), primal(c0, std::exp(lo)))};
    if (gap(hi) >= 0.0) return {std::exp(hi), std::min(dual(std::exp(hi)), primal(c0, std::exp(hi)))};
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
      const double mid = 0.5 * (lo + hi);
      (gap(mid) > 0.0 ? lo : hi) = mid;
    }
    const double c2 = std::exp(0.5 * (lo + hi));
    return {c2, std::min(dual(c2), primal(c0, c2))};
  }

  struct Best {
    double delta;
    double c2;
  };

  Best best_for(double c0) const {
    const auto [c2, value] = crossing(c0);
    return {std::min(consensus(c0), value), c2};
  }
};

}  // namespace

DeltaTerms delta_terms(const CertificateInputs& in, double m_beta, double c0, double c2) {
  const TermContext ctx(in, m_beta);
  return {ctx.consensus(c0), ctx.dual(c2), ctx.primal(c0, c2)};
}

RateCertificate certify(const CertificateInputs& in) {
  const std::size_t n = in.bounds.num_agents();
  if (n < 2) throw CertificationError("certificates need at least two agents");
  if (in.proximal.size() != n) throw ParameterError("need one proximal block per agent");
  if (!(in.c1 > 0.0)) throw ParameterError("c1 must be positive");
  if (in.sigma_sq < 0.0 || in.tau < 0.0) throw ParameterError("sigma^2 and tau must be >= 0");

  RateCertificate cert;
  cert.num_agents = n;
  cert.m_fbar = in.m_fbar;
  cert.M = in.bounds.max_M();
  cert.lambda_W = in.spectra.lambda_W;
  cert.lambda_max = in.spectra.lambda_max;
  cert.beta = in.beta;
  cert.tau = in.tau;
  cert.sigma_sq = in.sigma_sq;
  cert.eta_s = in.eta_s;
  cert.c1 = in.c1;

  const auto sc = m_beta(in.m_fbar, n, cert.M, in.beta, in.spectra.lambda_W);
  cert.m_beta = sc.m_beta;
  cert.gamma = sc.gamma;

  const auto cond =
      check_D_condition(in.proximal, in.bounds, in.eta_s, sc.m_beta, in.beta, in.P, in.dim);
  cert.condition_margin = cond.margin;
  if (!cond.pass) {
    std::ostringstream msg;
    msg << "proximal condition on D fails: margin " << cond.margin << " (m_beta=" << sc.m_beta
        << ", eta_s=" << in.eta_s << ", beta=" << in.beta << ")";
    throw CertificationError(msg.str());
  }

  const TermContext ctx(in, sc.m_beta);
  // golden-section search for the c0 maximising delta_s on (0, 2 eta_s m_beta)
  const double upper = 2.0 * in.eta_s * sc.m_beta;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = 0.0;
  double b = upper;
  double x1 = b - phi * (b - a);
  double x2 = a + phi * (b - a);
  double f1 = ctx.best_for(x1).delta;
  double f2 = ctx.best_for(x2).delta;
  for (int it = 0; it < 300 && (b - a) > 1e-15 * upper; ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = ctx.best_for(x2).delta;
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = ctx.best_for(x1).delta;
    }
  }
  const double c0 = f1 >= f2 ? x1 : x2;
  const auto best = ctx.best_for(c0);
  if (!(best.delta > 0.0 && best.delta < 1.0)) {
    std::ostringstream msg;
    msg << "no (c0, c2) gives a contraction factor in (0,1): best delta_s=" << best.delta
        << " at c0=" << c0 << ", kappa=" << kappa(c0, in.eta_s, in.proximal, in.bounds, in.beta,
                                                 in.P, in.dim);
    throw CertificationError(msg.str());
  }
  cert.c0 = c0;
  cert.c2_star = best.c2;
  cert.kappa = kappa(c0, in.eta_s, in.proximal, in.bounds, in.beta, in.P, in.dim);
  cert.delta_s = best.delta;
  cert.Gamma = 2.0 * (1.0 + in.c1) * best.delta / in.spectra.lambda_W + 2.0;
  cert.steady_bound = cert.Gamma * static_cast<double>(n) * in.tau * in.sigma_sq / cert.delta_s;
  for (std::size_t i = 0; i < n; ++i) {
    if (in.proximal[i].is_scaled_identity()) {
      cert.R_diag.push_back(0.5 * (in.bounds.m[i] + in.bounds.M[i]) + in.proximal[i].alpha());
    }
  }
  return cert;
}

QNormError::QNormError(const Matrix& P, std::span<const ProximalBlock> proximal,
                       const SmoothnessBounds& bounds, double beta, Vector x_star,
                       std::vector<Vector> q_star)
    : beta_(beta), x_star_(std::move(x_star)), q_star_(std::move(q_star)) {
  const std::size_t n = static_cast<std::size_t>(P.rows());
  if (proximal.size() != n || bounds.num_agents() != n || q_star_.size() != n) {
    throw ParameterError("Q-norm inputs disagree on the number of agents");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(P);
  const Vector& ev = solver.eigenvalues();
  const double cutoff = 1e-10 * ev(ev.size() - 1);
  Vector inv = Vector::Zero(ev.size());
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (ev(k) > cutoff) inv(k) = 1.0 / ev(k);
  }
  pinv_ = solver.eigenvectors() * inv.asDiagonal() * solver.eigenvectors().transpose();
  const std::size_t dim = static_cast<std::size_t>(x_star_.size());
  for (std::size_t i = 0; i < n; ++i) {
    Matrix R = proximal[i].as_matrix(dim);
    R.diagonal().array() += 0.5 * (bounds.m[i] + bounds.M[i]);
    R_.push_back(std::move(R));
  }
}

double QNormError::operator()(const NetworkState& state) const {
  const std::size_t n = state.num_agents();
  if (n != R_.size()) throw ParameterError("state has the wrong number of agents");
  double primal = 0.0;
  std::vector<Vector> e(n);
  Vector drift = Vector::Zero(x_star_.size());
  double scale = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vector dx = state.agents[i].x - x_star_;
    primal += dx.dot(R_[i] * dx);
    e[i] = state.agents[i].q - q_star_[i];
    drift += e[i];
    scale = std::max({scale, state.agents[i].q.norm(), q_star_[i].norm()});
  }
  if (drift.norm() > 1e-8 * scale) {
    throw InvariantError("q - q* has a consensus component of norm " +
                         std::to_string(drift.norm()) + "; it must lie in range(W^1/2)");
  }
  double dual = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double w = pinv_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (w != 0.0) dual += w * e[i].dot(e[j]);
    }
  }
  return beta_ * primal + dual;
}

std::vector<Vector> optimal_duals(std::span<const LocalDataset> datasets, const Vector& x_star) {
  std::vector<Vector> out;
  out.reserve(datasets.size());
  for (const auto& ds : datasets) out.push_back(-local_grad(x_star, ds));
  return out;
}

double z_error(const NetworkState& state, const Vector& x_star, std::span<const Vector> q_star,
               double beta, std::span<const ProximalBlock> proximal,
               const SmoothnessBounds& bounds, const Matrix& P) {
  return QNormError(P, proximal, bounds, beta, x_star,
                    std::vector<Vector>(q_star.begin(), q_star.end()))(state);
}

}  // namespace stsopro
