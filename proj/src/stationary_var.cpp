#include "sfm/stationary_var.hpp"

#include <Eigen/Eigenvalues>

#include "sfm/errors.hpp"

namespace sfm {

void PACParams::validate() const {
  if (a.empty()) throw ArgumentError("PACParams needs at least one matrix");
  const Index k = a.front().rows();
  for (const MatrixXd& ai : a) {
    if (ai.rows() != k || ai.cols() != k) throw ArgumentError("PACParams matrices must be k x k");
    if (!ai.allFinite()) throw DomainError("PACParams contains non-finite entries");
  }
}

MatrixXd a_to_p(const MatrixXd& a) {
  if (a.rows() != a.cols()) throw ArgumentError("a_to_p expects a square matrix");
  const MatrixXd inner = MatrixXd::Identity(a.rows(), a.rows()) + a * a.transpose();
  return sym_inv_sqrt_raw(inner) * a;
}

MatrixXd p_to_a(const MatrixXd& p) {
  if (p.rows() != p.cols()) throw ArgumentError("p_to_a expects a square matrix");
  const double smax = max_singular_value(p);
  if (!(smax < 1.0))
    throw DomainError("p_to_a: largest singular value " + std::to_string(smax) + " is not below 1");
  const MatrixXd inner = MatrixXd::Identity(p.rows(), p.rows()) - p * p.transpose();
  return sym_inv_sqrt_raw(inner) * p;
}

std::vector<MatrixXd> pac_partials(const PACParams& pac) {
  std::vector<MatrixXd> p;
  p.reserve(pac.a.size());
  for (const MatrixXd& a : pac.a) p.push_back(a_to_p(a));
  return p;
}

PACParams pac_from_partials(const std::vector<MatrixXd>& p) {
  PACParams out;
  for (const MatrixXd& pi : p) out.a.push_back(p_to_a(pi));
  return out;
}

VARParams pac_to_var(const PACParams& pac) {
  pac.validate();
  VarPieces<MatrixXd> pieces = pac_to_var_generic(pac_partials(pac));
  VARParams var;
  var.gamma = std::move(pieces.gamma);
  var.pi = symmetrize(pieces.pi);
  pieces.autocov.pop_back();
  var.autocov = std::move(pieces.autocov);
  return var;
}

MatrixXd companion_matrix(const std::vector<MatrixXd>& gamma) {
  if (gamma.empty()) throw ArgumentError("companion_matrix needs at least one coefficient");
  const Index k = gamma.front().rows();
  const Index m = static_cast<Index>(gamma.size());
  MatrixXd c = MatrixXd::Zero(k * m, k * m);
  for (Index i = 0; i < m; ++i) c.block(0, i * k, k, k) = gamma[static_cast<std::size_t>(i)];
  if (m > 1) c.block(k, 0, k * (m - 1), k * (m - 1)).setIdentity();
  return c;
}

double companion_spectral_radius(const VARParams& var) {
  const MatrixXd c = companion_matrix(var.gamma);
  Eigen::EigenSolver<MatrixXd> es(c, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

void require_stationary(const VARParams& var) {
  const double radius = companion_spectral_radius(var);
  if (!(radius < 1.0 - 1e-12))
    throw DomainError("VAR is not stationary: companion spectral radius " + std::to_string(radius));
  if (static_cast<int>(var.autocov.size()) != var.order())
    throw ArgumentError("VARParams autocovariances G_0..G_{m-1} are missing");
}

}  // namespace

MatrixXd build_initial_dist(const VARParams& var) {
  require_stationary(var);
  const Index k = var.dim();
  const Index m = var.order();
  MatrixXd g(k * m, k * m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j) {
      g.block(i * k, j * k, k, k) = i >= j ? var.autocov[static_cast<std::size_t>(i - j)]
                                           : MatrixXd(var.autocov[static_cast<std::size_t>(j - i)].transpose());
    }
  return g;
}

MatrixXd stationary_state_covariance(const VARParams& var) {
  require_stationary(var);
  const Index k = var.dim();
  const Index m = var.order();
  MatrixXd g(k * m, k * m);
  for (Index a = 0; a < m; ++a)
    for (Index b = 0; b < m; ++b) {
      // E[eta_{t-a} eta_{t-b}^T]
      g.block(a * k, b * k, k, k) = b >= a ? var.autocov[static_cast<std::size_t>(b - a)]
                                           : MatrixXd(var.autocov[static_cast<std::size_t>(a - b)].transpose());
    }
  return g;
}

ExpansionPieces rotate_expansion(const MatrixXd& q, const ExpansionPieces& pieces) {
  const Index k = q.rows();
  if (q.cols() != k) throw ArgumentError("rotate_expansion: Q must be square");
  if ((q.transpose() * q - MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() > 1e-10)
    throw ArgumentError("rotate_expansion: Q is not orthogonal");
  ExpansionPieces out;
  if (pieces.lambda.size() > 0) out.lambda = pieces.lambda * q;
  if (pieces.eta.size() > 0) out.eta = pieces.eta * q;
  for (const MatrixXd& g : pieces.gamma) out.gamma.push_back(q.transpose() * g * q);
  if (pieces.pi.size() > 0) out.pi = q.transpose() * pieces.pi * q;
  for (const MatrixXd& a : pieces.a) out.a.push_back(q.transpose() * a * q);
  return out;
}

}  // namespace sfm
