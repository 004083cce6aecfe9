#pragma once

// Matrix-variate distributions and the closed-form moments they induce on the
// shared variation matrix Delta = Lambda Lambda^T. Matrix indices are 0-based.

#include "sfm/linalg.hpp"
#include "sfm/rng.hpp"

namespace sfm {

/// Lambda ~ N_{p,k}(M, Phi, Psi), i.e. vec(Lambda) ~ N(vec(M), Psi (x) Phi).
struct MatrixNormalParams {
  MatrixXd location;  // p x k
  SpdMatrix phi;      // among-row scale, p x p
  SpdMatrix psi;      // among-column scale, k x k

  void validate() const;
};

/// Lambda ~ t_{p,k}(dof, M, PhiBreve, Psi) via S ~ W_p(dof + p - 1, PhiBreve^{-1}),
/// X ~ N_{p,k}(0, I, Psi), Lambda = (S^{-1/2})^T X + M.
struct MatrixTParams {
  double dof = 0.0;
  MatrixXd location;
  SpdMatrix phi_breve;
  SpdMatrix psi;

  void validate() const;
  /// Standardized among-row scale PhiBreve / (dof - 2); needs dof > 2.
  MatrixXd phi() const;
};

MatrixXd sample_matrix_normal(const MatrixNormalParams& params, Rng& rng);

/// Bartlett-decomposition Wishart draw W_dim(dof, scale); E = dof * scale.
SpdMatrix sample_wishart(double dof, const SpdMatrix& scale, Rng& rng);
/// Same, from the lower Cholesky factor of the scale matrix.
MatrixXd sample_wishart_chol(double dof, const MatrixXd& scale_chol, Rng& rng);

MatrixXd sample_matrix_t(const MatrixTParams& params, Rng& rng);

/// E(Delta) = tr(Psi) Phi under a zero-mean matrix normal.
MatrixXd delta_mean_mn(const SpdMatrix& phi, const SpdMatrix& psi);

/// Cov(delta_ij, delta_kl) = tr(Psi^2)(phi_ik phi_jl + phi_il phi_jk).
double delta_cov_mn(const SpdMatrix& phi, const SpdMatrix& psi, Index i, Index j, Index k,
                    Index l);

/// E(Delta) = tr(Psi) PhiBreve / (dof - 2) under a zero-mean matrix-t, dof > 2.
MatrixXd delta_mean_t(double dof, const SpdMatrix& phi_breve, const SpdMatrix& psi);

/// Var(delta_ij) under the matrix-t for dof > 4; `phi` is the standardized
/// scale PhiBreve / (dof - 2).
double delta_var_t(double dof, const SpdMatrix& phi, const SpdMatrix& psi, Index i, Index j);

/// s_k(c) = (1 + 2c){1 + (2 + k)c} / (1 + 3c), the variance-to-mean ratio of
/// delta_ij when Phi = I and Psi = psi I, as a function of c = 1/(dof - 4).
double scale_factor_sk(int k, double varsigma_check);

/// Ledermann bound (2p + 1 - sqrt(8p + 1)) / 2.
double ledermann(int p);
/// Largest admissible truncation level ceil(ledermann(p)) - 1, floored at 1
/// so that one-factor models stay expressible for p <= 3.
int max_truncation(int p);

/// log of the multivariate gamma function Gamma_p(a).
double log_multivariate_gamma(int p, double a);

/// log W_p(s; dof, scale) given the scale's inverse and log-determinant.
double wishart_log_density(const MatrixXd& s, double dof, const MatrixXd& scale_inverse,
                           double scale_log_det);

}  // namespace sfm
