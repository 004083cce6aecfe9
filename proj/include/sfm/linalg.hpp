#pragma once

#include <string>

#include <Eigen/Dense>

namespace sfm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Symmetric positive definite matrix. Construction validates symmetry
/// (1e-12 relative) and an eigenvalue floor of 1e-10 relative to the largest
/// eigenvalue; inputs that fail are rejected, never regularized.
class SpdMatrix {
 public:
  SpdMatrix() = default;
  explicit SpdMatrix(MatrixXd m, const std::string& name = "matrix");

  static SpdMatrix identity(Index dim) { return SpdMatrix(MatrixXd::Identity(dim, dim)); }

  const MatrixXd& matrix() const noexcept { return m_; }
  Index dim() const noexcept { return m_.rows(); }
  double operator()(Index i, Index j) const { return m_(i, j); }

 private:
  MatrixXd m_;
};

/// Throws DomainError naming the offending eigenvalue if `m` is not SPD.
void validate_spd(const MatrixXd& m, const std::string& name = "matrix");
bool is_spd(const MatrixXd& m);

/// Symmetric square root X with X * X = S.
SpdMatrix sym_sqrt(const SpdMatrix& s);
/// Symmetric inverse square root.
SpdMatrix sym_inv_sqrt(const SpdMatrix& s);

// Unvalidated variants for internal use on matrices known to be SPD.
MatrixXd sym_sqrt_raw(const MatrixXd& s);
MatrixXd sym_inv_sqrt_raw(const MatrixXd& s);

/// 0.5 * (m + m^T)
inline MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

/// Lower Cholesky factor; NumericalError (carrying `block`) on failure.
MatrixXd cholesky_lower(const MatrixXd& m, const std::string& block = "cholesky");

/// log|m| for SPD m via Cholesky.
double log_det_spd(const MatrixXd& m);

/// Inverse of an SPD matrix via Cholesky.
MatrixXd inverse_spd(const MatrixXd& m, const std::string& block = "inverse");

/// Draw from N(precision^{-1} * linear, precision^{-1}).
VectorXd sample_from_precision(const MatrixXd& precision, const VectorXd& linear,
                               const VectorXd& std_normals,
                               const std::string& block = "precision");

/// Largest singular value.
double max_singular_value(const MatrixXd& m);
double min_singular_value(const MatrixXd& m);

/// Random orthogonal matrix (Haar) from a matrix of standard normals.
MatrixXd orthogonal_from_normals(const MatrixXd& z);

}  // namespace sfm
