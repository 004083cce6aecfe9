#pragma once

// Forward-mode differentiation at the matrix level. A MatJet carries a value
// and its directional derivatives along a fixed set of input directions;
// constants carry no derivatives. Matrix functions use their exact Frechet
// derivatives (inverse, symmetric square root, log-determinant), so composed
// maps such as A -> (Gamma, Pi) differentiate without truncation error.

#include <vector>

#include "sfm/linalg.hpp"

namespace sfm {

struct ScalarJet {
  double value = 0.0;
  VectorXd grad;  // empty for constants

  ScalarJet() = default;
  ScalarJet(double v) : value(v) {}  // NOLINT: implicit constant lift
  ScalarJet(double v, VectorXd g) : value(v), grad(std::move(g)) {}
};

struct MatJet {
  MatrixXd value;
  std::vector<MatrixXd> d;  // empty for constants

  MatJet() = default;
  MatJet(MatrixXd v) : value(std::move(v)) {}  // NOLINT: implicit constant lift
  MatJet(MatrixXd v, std::vector<MatrixXd> dirs) : value(std::move(v)), d(std::move(dirs)) {}

  bool is_constant() const noexcept { return d.empty(); }
  Index rows() const { return value.rows(); }
  Index cols() const { return value.cols(); }
  std::size_t directions() const noexcept { return d.size(); }

  /// Variable whose derivative along direction `dir` of `total` is E_{ij}.
  static MatJet seed(const MatrixXd& v, const std::vector<std::pair<Index, Index>>& entries);
};

MatJet operator+(const MatJet& a, const MatJet& b);
MatJet operator-(const MatJet& a, const MatJet& b);
MatJet operator-(const MatJet& a);
MatJet operator*(const MatJet& a, const MatJet& b);
MatJet operator*(double s, const MatJet& a);

MatJet mtranspose(const MatJet& a);
MatJet minv(const MatJet& a);
/// Symmetric square root of a symmetric positive definite jet.
MatJet msqrt(const MatJet& a);
ScalarJet mlogdet_spd(const MatJet& a);
ScalarJet mtrace(const MatJet& a);

ScalarJet operator+(const ScalarJet& a, const ScalarJet& b);
ScalarJet operator-(const ScalarJet& a, const ScalarJet& b);
ScalarJet operator*(double s, const ScalarJet& a);

// Plain-matrix overloads so templated algorithms run on MatrixXd unchanged.
inline MatrixXd mtranspose(const MatrixXd& a) { return a.transpose(); }
inline MatrixXd minv(const MatrixXd& a) { return a.partialPivLu().inverse(); }
inline MatrixXd msqrt(const MatrixXd& a) { return sym_sqrt_raw(a); }
inline double mlogdet_spd(const MatrixXd& a) { return log_det_spd(a); }
inline double mtrace(const MatrixXd& a) { return a.trace(); }

inline const MatrixXd& value_of(const MatrixXd& a) { return a; }
inline const MatrixXd& value_of(const MatJet& a) { return a.value; }
inline double value_of(double a) { return a; }
inline double value_of(const ScalarJet& a) { return a.value; }

}  // namespace sfm
