#include "sfm/matrix_variate.hpp"

#include <cmath>

#include "sfm/errors.hpp"

namespace sfm {

namespace {

void check_index(Index idx, Index dim) {
  if (idx < 0 || idx >= dim) throw ArgumentError("index " + std::to_string(idx) + " out of range");
}

}  // namespace

void MatrixNormalParams::validate() const {
  if (location.rows() != phi.dim() || location.cols() != psi.dim())
    throw ArgumentError("matrix normal: location is " + std::to_string(location.rows()) + "x" +
                        std::to_string(location.cols()) + " but scales are " +
                        std::to_string(phi.dim()) + " and " + std::to_string(psi.dim()));
}

void MatrixTParams::validate() const {
  if (!(dof > 0.0)) throw DomainError("matrix-t degrees of freedom must be positive");
  if (location.rows() != phi_breve.dim() || location.cols() != psi.dim())
    throw ArgumentError("matrix-t: location dimensions do not match the scale matrices");
}

MatrixXd MatrixTParams::phi() const {
  if (!(dof > 2.0)) throw DomainError("standardized scale requires dof > 2");
  return phi_breve.matrix() / (dof - 2.0);
}

MatrixXd sample_matrix_normal(const MatrixNormalParams& params, Rng& rng) {
  params.validate();
  const MatrixXd lphi = cholesky_lower(params.phi.matrix(), "matrix normal row scale");
  const MatrixXd lpsi = cholesky_lower(params.psi.matrix(), "matrix normal column scale");
  const MatrixXd z = rng.normal_matrix(params.phi.dim(), params.psi.dim());
  return params.location + lphi * z * lpsi.transpose();
}

MatrixXd sample_wishart_chol(double dof, const MatrixXd& scale_chol, Rng& rng) {
  const Index p = scale_chol.rows();
  if (!(dof > static_cast<double>(p) - 1.0))
    throw DomainError("Wishart degrees of freedom " + std::to_string(dof) +
                      " must exceed dimension - 1 = " + std::to_string(p - 1));
  MatrixXd a = MatrixXd::Zero(p, p);
  for (Index i = 0; i < p; ++i) {
    a(i, i) = std::sqrt(rng.chi_squared(dof - static_cast<double>(i)));
    for (Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  const MatrixXd la = scale_chol * a;
  return symmetrize(la * la.transpose());
}

SpdMatrix sample_wishart(double dof, const SpdMatrix& scale, Rng& rng) {
  if (!(dof > static_cast<double>(scale.dim()) - 1.0))
    throw DomainError("Wishart degrees of freedom " + std::to_string(dof) +
                      " must exceed dimension - 1 = " + std::to_string(scale.dim() - 1));
  return SpdMatrix(sample_wishart_chol(dof, cholesky_lower(scale.matrix(), "Wishart scale"), rng),
                   "Wishart draw");
}

MatrixXd sample_matrix_t(const MatrixTParams& params, Rng& rng) {
  params.validate();
  const Index p = params.phi_breve.dim();
  const MatrixXd scale_inv = inverse_spd(params.phi_breve.matrix(), "matrix-t row scale");
  const MatrixXd s = sample_wishart_chol(params.dof + static_cast<double>(p) - 1.0,
                                         cholesky_lower(scale_inv, "matrix-t row scale"), rng);
  const MatrixXd lpsi = cholesky_lower(params.psi.matrix(), "matrix-t column scale");
  const MatrixXd x = rng.normal_matrix(p, params.psi.dim()) * lpsi.transpose();
  // Any root R R^T = S gives rows with covariance S^{-1}; use Cholesky.
  const MatrixXd ls = cholesky_lower(s, "matrix-t Wishart draw");
  return params.location + ls.transpose().triangularView<Eigen::Upper>().solve(x);
}

MatrixXd delta_mean_mn(const SpdMatrix& phi, const SpdMatrix& psi) {
  return psi.matrix().trace() * phi.matrix();
}

double delta_cov_mn(const SpdMatrix& phi, const SpdMatrix& psi, Index i, Index j, Index k,
                    Index l) {
  const Index p = phi.dim();
  check_index(i, p);
  check_index(j, p);
  check_index(k, p);
  check_index(l, p);
  const double tr_psi2 = (psi.matrix() * psi.matrix()).trace();
  return tr_psi2 * (phi(i, k) * phi(j, l) + phi(i, l) * phi(j, k));
}

MatrixXd delta_mean_t(double dof, const SpdMatrix& phi_breve, const SpdMatrix& psi) {
  if (!(dof > 2.0)) throw DomainError("mean undefined: matrix-t E(Delta) requires dof > 2");
  return psi.matrix().trace() * phi_breve.matrix() / (dof - 2.0);
}

double delta_var_t(double dof, const SpdMatrix& phi, const SpdMatrix& psi, Index i, Index j) {
  if (!(dof > 4.0)) throw DomainError("variance undefined: matrix-t Var(delta) requires dof > 4");
  check_index(i, phi.dim());
  check_index(j, phi.dim());
  const double tr_psi = psi.matrix().trace();
  const double tr_psi2 = (psi.matrix() * psi.matrix()).trace();
  const double col = tr_psi * tr_psi + (dof - 2.0) * tr_psi2;
  const double row = dof * phi(i, j) * phi(i, j) + (dof - 2.0) * phi(i, i) * phi(j, j);
  return col * row / ((dof - 1.0) * (dof - 4.0));
}

double scale_factor_sk(int k, double c) {
  if (!(c >= 0.0)) throw DomainError("scale factor requires a non-negative transformed dof");
  return (1.0 + 2.0 * c) * (1.0 + (2.0 + k) * c) / (1.0 + 3.0 * c);
}

double ledermann(int p) {
  if (p < 1) throw ArgumentError("Ledermann bound needs p >= 1");
  const double pd = static_cast<double>(p);
  return (2.0 * pd + 1.0 - std::sqrt(8.0 * pd + 1.0)) / 2.0;
}

int max_truncation(int p) {
  const int h = static_cast<int>(std::ceil(ledermann(p))) - 1;
  return std::max(h, 1);
}

double log_multivariate_gamma(int p, double a) {
  double out = 0.25 * p * (p - 1) * std::log(M_PI);
  for (int j = 1; j <= p; ++j) out += std::lgamma(a + 0.5 * (1 - j));
  return out;
}

double wishart_log_density(const MatrixXd& s, double dof, const MatrixXd& scale_inverse,
                           double scale_log_det) {
  const int p = static_cast<int>(s.rows());
  return 0.5 * (dof - p - 1.0) * log_det_spd(s) - 0.5 * (scale_inverse * s).trace() -
         0.5 * dof * p * std::log(2.0) - 0.5 * dof * scale_log_det -
         log_multivariate_gamma(p, 0.5 * dof);
}

}  // namespace sfm
