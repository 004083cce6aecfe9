#pragma once

// Stationary VAR(m) factor dynamics eta_t = sum_i Gamma_i eta_{t-i} + e_t,
// e_t ~ N(0, Pi), constrained to Var(eta_t) = I. The process is parameterized
// by unconstrained matrices A_1..A_m through partial autocorrelations P_i.

#include <vector>

#include "sfm/linalg.hpp"
#include "sfm/matjet.hpp"

namespace sfm {

struct PACParams {
  std::vector<MatrixXd> a;  // A_1..A_m, each k x k

  int order() const noexcept { return static_cast<int>(a.size()); }
  Index dim() const { return a.empty() ? 0 : a.front().rows(); }
  void validate() const;
};

struct VARParams {
  std::vector<MatrixXd> gamma;    // Gamma_1..Gamma_m
  MatrixXd pi;                    // innovation variance
  std::vector<MatrixXd> autocov;  // G_0..G_{m-1}, G_h = E[eta_{t+h} eta_t^T], G_0 = I

  int order() const noexcept { return static_cast<int>(gamma.size()); }
  Index dim() const { return pi.rows(); }
};

/// P = (I + A A^T)^{-1/2} A; every singular value of P is below one.
MatrixXd a_to_p(const MatrixXd& a);
/// A = (I - P P^T)^{-1/2} P; DomainError unless max singular value < 1.
MatrixXd p_to_a(const MatrixXd& p);

template <class M>
M a_to_p_generic(const M& a) {
  const MatrixXd eye = MatrixXd::Identity(value_of(a).rows(), value_of(a).rows());
  const M inner = M(eye) + a * mtranspose(a);
  return minv(msqrt(inner)) * a;
}

template <class M>
struct VarPieces {
  std::vector<M> gamma;
  M pi;
  std::vector<M> autocov;  // G_0..G_m
};

/// Maps partial autocorrelations P_1..P_m to the stationary VAR with unit
/// marginal variance. Forward and backward prediction problems are solved
/// jointly; phi_{s,i} / phistar_{s,i} are the order-s forward / backward
/// coefficients and sigma / sigma_star their prediction error variances.
template <class M>
VarPieces<M> pac_to_var_generic(const std::vector<M>& p) {
  const Index k = value_of(p.front()).rows();
  const MatrixXd eye = MatrixXd::Identity(k, k);
  M sigma(eye);
  M sigma_star(eye);
  std::vector<M> phi;
  std::vector<M> phi_star;
  VarPieces<M> out;
  out.autocov.push_back(M(eye));
  const std::size_t m = p.size();
  for (std::size_t s = 0; s < m; ++s) {
    const M root = msqrt(sigma);
    const M root_star = msqrt(sigma_star);
    const M f = root * p[s] * minv(root_star);
    const M f_star = root_star * mtranspose(p[s]) * minv(root);

    M g = f * sigma_star;
    for (std::size_t j = 1; j <= s; ++j) g = g + phi[j - 1] * out.autocov[s + 1 - j];
    out.autocov.push_back(g);

    std::vector<M> next(s + 1);
    std::vector<M> next_star(s + 1);
    for (std::size_t j = 1; j <= s; ++j) {
      next[j - 1] = phi[j - 1] - f * phi_star[s - j];
      next_star[j - 1] = phi_star[j - 1] - f_star * phi[s - j];
    }
    next[s] = f;
    next_star[s] = f_star;

    const M sigma_next = sigma - f * sigma_star * mtranspose(f);
    sigma_star = sigma_star - f_star * sigma * mtranspose(f_star);
    sigma = sigma_next;
    phi = std::move(next);
    phi_star = std::move(next_star);
  }
  out.gamma = std::move(phi);
  out.pi = sigma;
  return out;
}

VARParams pac_to_var(const PACParams& pac);
std::vector<MatrixXd> pac_partials(const PACParams& pac);
PACParams pac_from_partials(const std::vector<MatrixXd>& p);

/// km x km companion matrix of the VAR coefficients.
MatrixXd companion_matrix(const std::vector<MatrixXd>& gamma);
double companion_spectral_radius(const VARParams& var);

/// Block-Toeplitz covariance of (eta_{1-m}, ..., eta_0) in time order, with
/// block (i, j) = G_{i-j} for i >= j and G_{j-i}^T otherwise.
MatrixXd build_initial_dist(const VARParams& var);
/// Covariance of the companion state (eta_t, eta_{t-1}, ..., eta_{t-m+1}).
MatrixXd stationary_state_covariance(const VARParams& var);

/// Pieces of a parameter-expanded dynamic state.
struct ExpansionPieces {
  MatrixXd lambda;            // p x k
  MatrixXd eta;               // rows are eta_t^T
  std::vector<MatrixXd> gamma;
  MatrixXd pi;
  std::vector<MatrixXd> a;
};

/// Lambda = Lt Q, eta_t = Q^T eta~_t, Gamma_i = Q^T Gamma~_i Q, Pi = Q^T Pi~ Q,
/// A_i = Q^T A~_i Q. ArgumentError unless Q^T Q = I to 1e-10.
ExpansionPieces rotate_expansion(const MatrixXd& q, const ExpansionPieces& pieces);

}  // namespace sfm
