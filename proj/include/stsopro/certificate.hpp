#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stsopro/linalg.hpp"
#include "stsopro/loss.hpp"
#include "stsopro/optimizer.hpp"
#include "stsopro/topology.hpp"

namespace stsopro {

/// Finite-population sampling factor (C - G) / (C G).
double tau(std::size_t C, std::size_t G);

/// zeta(gamma) = min{ m_fbar/N - 2 M gamma, beta lambda_W / (2 (1 + 1/gamma^2)) }
double zeta(double gamma, double m_fbar, std::size_t N, double M, double beta, double lambda_W);

struct StrongConvexity {
  double m_beta = 0.0;
  double gamma = 0.0;  // maximiser of zeta
};

/// Maximises zeta through the unique positive root of
///   4 M N g^3 + (beta N lambda_W - 2 m_fbar) g^2 + 4 M N g - 2 m_fbar = 0,
/// which lies in (0, m_fbar / (2 M N)).
StrongConvexity m_beta(double m_fbar, std::size_t N, double M, double beta, double lambda_W);

/// Everything the rate certificate depends on.
struct CertificateInputs {
  SmoothnessBounds bounds;
  double m_fbar = 0.0;
  Matrix P;
  SpectralSummary spectra;
  double beta = 1.0;
  std::vector<ProximalBlock> proximal;
  std::size_t dim = 1;
  double eta_s = 0.5;
  double c1 = 1.0;
  double sigma_sq = 0.0;
  double tau = 0.0;
};

struct ConditionResult {
  bool pass = false;
  double margin = 0.0;  // smallest eigenvalue of D minus the required lower bound
};

/// Checks D > Lambda_M/(2(1-eta_s)) + (Lambda_M - Lambda_m)^2/(8 eta_s m_beta)
///              + (Lambda_M - 3 Lambda_m)/2 + beta (I/2 + W).
ConditionResult check_D_condition(std::span<const ProximalBlock> proximal,
                                  const SmoothnessBounds& bounds, double eta_s, double m_beta,
                                  double beta, const Matrix& P, std::size_t dim);

/// lambda_min( R - Lambda_M/(2(1-eta_s)) - (Lambda_M - Lambda_m)^2/(4 c0)
///             + Lambda_m - Lambda_M - beta (I/2 + W) ),  R = (Lambda_m + Lambda_M)/2 + D.
double kappa(double c0, double eta_s, std::span<const ProximalBlock> proximal,
             const SmoothnessBounds& bounds, double beta, const Matrix& P, std::size_t dim);

/// The three upper bounds on the contraction factor at a given (c0, c2).
struct DeltaTerms {
  double consensus = 0.0;  // beta lambda_W kappa / (2 (1 + c1) ||Lambda_M + D||^2)
  double dual = 0.0;       // (1 - eta_s) / ((1 + 1/c1)(1 + c2))
  double primal = 0.0;     // (2 eta_s m_beta - c0) / lambda_max(R + k Lambda_M^2 / (beta lambda_W))
  double min() const noexcept;
};

DeltaTerms delta_terms(const CertificateInputs& in, double m_beta, double c0, double c2);

struct RateCertificate {
  std::size_t num_agents = 0;
  double m_fbar = 0.0;
  double M = 0.0;
  double m_beta = 0.0;
  double gamma = 0.0;
  double lambda_W = 0.0;
  double lambda_max = 0.0;
  double beta = 0.0;
  double tau = 0.0;
  double sigma_sq = 0.0;
  double eta_s = 0.0;
  double c0 = 0.0;
  double c1 = 0.0;
  double c2_star = 0.0;
  double kappa = 0.0;
  double delta_s = 0.0;
  double Gamma = 0.0;
  double steady_bound = 0.0;  // Gamma N tau sigma^2 / delta_s
  double condition_margin = 0.0;
  std::vector<double> R_diag;  // per-agent (m_i + M_i)/2 + alpha_i for scalar blocks
};

/// Maximises delta_s jointly over c0 in (0, 2 eta_s m_beta) (golden section)
/// and c2 > 0 (the crossing of the decreasing and increasing terms), then
/// fills in Gamma and the steady-state bound. Throws CertificationError when
/// the proximal condition fails or no feasible pair gives delta_s > 0.
RateCertificate certify(const CertificateInputs& in);

/// ||z - z*||_Q^2 = beta (x - x*)^T R (x - x*) + (q - q*)^T (W^+) (q - q*),
/// i.e. with v = (W^+)^{1/2} q. q* is the block vector (-grad f_i(x*)).
class QNormError {
 public:
  QNormError(const Matrix& P, std::span<const ProximalBlock> proximal,
             const SmoothnessBounds& bounds, double beta, Vector x_star,
             std::vector<Vector> q_star);

  /// Throws InvariantError when sum_i (q_i - q*_i) is not ~0 (q - q* must lie
  /// in the range of W^{1/2}).
  double operator()(const NetworkState& state) const;

  const Matrix& laplacian_pinv() const noexcept { return pinv_; }

 private:
  Matrix pinv_;
  std::vector<Matrix> R_;
  double beta_;
  Vector x_star_;
  std::vector<Vector> q_star_;
};

/// q* blocks: -grad f_i(x*).
std::vector<Vector> optimal_duals(std::span<const LocalDataset> datasets, const Vector& x_star);

double z_error(const NetworkState& state, const Vector& x_star, std::span<const Vector> q_star,
               double beta, std::span<const ProximalBlock> proximal,
               const SmoothnessBounds& bounds, const Matrix& P);

}  // namespace stsopro
