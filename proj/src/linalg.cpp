#include "sfm/linalg.hpp"

#include <cmath>
#include <sstream>

#include "sfm/errors.hpp"

namespace sfm {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kEigenFloor = 1e-10;

}  // namespace

void validate_spd(const MatrixXd& m, const std::string& name) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw ArgumentError(name + " must be a non-empty square matrix");
  if (!m.allFinite()) throw DomainError(name + " has non-finite entries");
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol * scale) {
    std::ostringstream os;
    os << name << " is not symmetric (max asymmetry " << asym << ")";
    throw DomainError(os.str());
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(m), Eigen::EigenvaluesOnly);
  const VectorXd& ev = es.eigenvalues();
  const double largest = ev.maxCoeff();
  if (!(largest > 0.0) || ev.minCoeff() <= kEigenFloor * largest) {
    std::ostringstream os;
    os << name << " is not positive definite: eigenvalue " << ev.minCoeff()
       << " (largest " << largest << ")";
    throw DomainError(os.str());
  }
}

bool is_spd(const MatrixXd& m) {
  try {
    validate_spd(m);
    return true;
  } catch (const Error&) {
    return false;
  }
}

SpdMatrix::SpdMatrix(MatrixXd m, const std::string& name) : m_(std::move(m)) {
  validate_spd(m_, name);
  m_ = symmetrize(m_);
}

MatrixXd sym_sqrt_raw(const MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(s));
  const VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const MatrixXd& u = es.eigenvectors();
  return symmetrize(u * root.asDiagonal() * u.transpose());
}

MatrixXd sym_inv_sqrt_raw(const MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(s));
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw NumericalError("inverse square root of a non-positive-definite matrix");
  const VectorXd root = es.eigenvalues().cwiseSqrt().cwiseInverse();
  const MatrixXd& u = es.eigenvectors();
  return symmetrize(u * root.asDiagonal() * u.transpose());
}

SpdMatrix sym_sqrt(const SpdMatrix& s) { return SpdMatrix(sym_sqrt_raw(s.matrix())); }

SpdMatrix sym_inv_sqrt(const SpdMatrix& s) {
  return SpdMatrix(sym_inv_sqrt_raw(s.matrix()));
}

MatrixXd cholesky_lower(const MatrixXd& m, const std::string& block) {
  Eigen::LLT<MatrixXd> llt(symmetrize(m));
  if (llt.info() != Eigen::Success) throw NumericalError("Cholesky factorization failed", -1, block);
  return llt.matrixL();
}

double log_det_spd(const MatrixXd& m) {
  const MatrixXd l = cholesky_lower(m, "log-determinant");
  return 2.0 * l.diagonal().array().log().sum();
}

MatrixXd inverse_spd(const MatrixXd& m, const std::string& block) {
  Eigen::LLT<MatrixXd> llt(symmetrize(m));
  if (llt.info() != Eigen::Success) throw NumericalError("Cholesky factorization failed", -1, block);
  return symmetrize(llt.solve(MatrixXd::Identity(m.rows(), m.cols())));
}

VectorXd sample_from_precision(const MatrixXd& precision, const VectorXd& linear,
                               const VectorXd& std_normals, const std::string& block) {
  Eigen::LLT<MatrixXd> llt(symmetrize(precision));
  if (llt.info() != Eigen::Success) throw NumericalError("Cholesky factorization failed", -1, block);
  const VectorXd mean = llt.solve(linear);
  // If Q = L L^T then L^{-T} z has covariance Q^{-1}.
  return mean + llt.matrixU().solve(std_normals);
}

double max_singular_value(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  return svd.singularValues()(0);
}

double min_singular_value(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  return svd.singularValues().minCoeff();
}

MatrixXd orthogonal_from_normals(const MatrixXd& z) {
  Eigen::HouseholderQR<MatrixXd> qr(z);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(z.rows(), z.cols());
  const MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < q.cols(); ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

}  // namespace sfm
