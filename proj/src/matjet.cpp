#include "sfm/matjet.hpp"

#include "sfm/errors.hpp"

namespace sfm {

namespace {

std::size_t common_directions(const MatJet& a, const MatJet& b) {
  if (!a.is_constant() && !b.is_constant() && a.d.size() != b.d.size())
    throw InternalError("MatJet direction count mismatch");
  return std::max(a.d.size(), b.d.size());
}

VectorXd grad_or_zero(const ScalarJet& a, Index n) {
  return a.grad.size() == 0 ? VectorXd::Zero(n) : a.grad;
}

}  // namespace

MatJet MatJet::seed(const MatrixXd& v, const std::vector<std::pair<Index, Index>>& entries) {
  MatJet out(v);
  out.d.reserve(entries.size());
  for (const auto& [i, j] : entries) {
    MatrixXd e = MatrixXd::Zero(v.rows(), v.cols());
    e(i, j) = 1.0;
    out.d.push_back(std::move(e));
  }
  return out;
}

MatJet operator+(const MatJet& a, const MatJet& b) {
  const std::size_t n = common_directions(a, b);
  MatJet out(a.value + b.value);
  if (n == 0) return out;
  out.d.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (a.is_constant()) out.d[i] = b.d[i];
    else if (b.is_constant()) out.d[i] = a.d[i];
    else out.d[i] = a.d[i] + b.d[i];
  }
  return out;
}

MatJet operator-(const MatJet& a) {
  MatJet out(-a.value);
  out.d.reserve(a.d.size());
  for (const MatrixXd& x : a.d) out.d.push_back(-x);
  return out;
}

MatJet operator-(const MatJet& a, const MatJet& b) { return a + (-b); }

MatJet operator*(const MatJet& a, const MatJet& b) {
  const std::size_t n = common_directions(a, b);
  MatJet out(a.value * b.value);
  if (n == 0) return out;
  out.d.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (a.is_constant()) out.d[i] = a.value * b.d[i];
    else if (b.is_constant()) out.d[i] = a.d[i] * b.value;
    else out.d[i] = a.d[i] * b.value + a.value * b.d[i];
  }
  return out;
}

MatJet operator*(double s, const MatJet& a) {
  MatJet out(s * a.value);
  out.d.reserve(a.d.size());
  for (const MatrixXd& x : a.d) out.d.push_back(s * x);
  return out;
}

MatJet mtranspose(const MatJet& a) {
  MatJet out(a.value.transpose());
  out.d.reserve(a.d.size());
  for (const MatrixXd& x : a.d) out.d.push_back(x.transpose());
  return out;
}

MatJet minv(const MatJet& a) {
  MatJet out(a.value.partialPivLu().inverse());
  out.d.reserve(a.d.size());
  for (const MatrixXd& x : a.d) out.d.push_back(-out.value * x * out.value);
  return out;
}

MatJet msqrt(const MatJet& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(a.value));
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw NumericalError("square root of a non-positive-definite matrix jet");
  const VectorXd root = es.eigenvalues().cwiseSqrt();
  const MatrixXd& u = es.eigenvectors();
  MatJet out(symmetrize(u * root.asDiagonal() * u.transpose()));
  // S dS + dS S = dX, solved in the eigenbasis.
  const Index n = root.size();
  MatrixXd denom(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) denom(i, j) = root(i) + root(j);
  out.d.reserve(a.d.size());
  for (const MatrixXd& x : a.d) {
    const MatrixXd rotated = (u.transpose() * symmetrize(x) * u).cwiseQuotient(denom);
    out.d.push_back(u * rotated * u.transpose());
  }
  return out;
}

ScalarJet mlogdet_spd(const MatJet& a) {
  Eigen::LLT<MatrixXd> llt(symmetrize(a.value));
  if (llt.info() != Eigen::Success) throw NumericalError("log-determinant of a non-SPD jet");
  ScalarJet out(2.0 * MatrixXd(llt.matrixL()).diagonal().array().log().sum());
  if (a.is_constant()) return out;
  const MatrixXd inv = llt.solve(MatrixXd::Identity(a.rows(), a.cols()));
  out.grad.resize(static_cast<Index>(a.d.size()));
  for (std::size_t i = 0; i < a.d.size(); ++i)
    out.grad(static_cast<Index>(i)) = (inv.transpose().array() * a.d[i].array()).sum();
  return out;
}

ScalarJet mtrace(const MatJet& a) {
  ScalarJet out(a.value.trace());
  if (a.is_constant()) return out;
  out.grad.resize(static_cast<Index>(a.d.size()));
  for (std::size_t i = 0; i < a.d.size(); ++i) out.grad(static_cast<Index>(i)) = a.d[i].trace();
  return out;
}

ScalarJet operator+(const ScalarJet& a, const ScalarJet& b) {
  const Index n = std::max(a.grad.size(), b.grad.size());
  if (n == 0) return ScalarJet(a.value + b.value);
  return ScalarJet(a.value + b.value, grad_or_zero(a, n) + grad_or_zero(b, n));
}

ScalarJet operator-(const ScalarJet& a, const ScalarJet& b) { return a + (-1.0 * b); }

ScalarJet operator*(double s, const ScalarJet& a) {
  return a.grad.size() == 0 ? ScalarJet(s * a.value) : ScalarJet(s * a.value, s * a.grad);
}

}  // namespace sfm
