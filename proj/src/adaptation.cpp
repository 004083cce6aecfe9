#include <algorithm>
#include <cmath>
#include <numeric>

#include "sfm/errors.hpp"
#include "sfm/inference.hpp"
#include "sfm/matrix_variate.hpp"

namespace sfm {

namespace {

std::vector<Index> ranked_columns(const MatrixXd& lambda) {
  const VectorXd norms = lambda.colwise().squaredNorm().transpose();
  std::vector<Index> order(static_cast<std::size_t>(lambda.cols()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return norms(a) > norms(b); });
  return order;
}

MatrixXd select_columns(const MatrixXd& m, const std::vector<Index>& keep) {
  MatrixXd out(m.rows(), static_cast<Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) out.col(static_cast<Index>(i)) = m.col(keep[i]);
  return out;
}

MatrixXd principal_submatrix(const MatrixXd& m, const std::vector<Index>& keep) {
  const Index k = static_cast<Index>(keep.size());
  MatrixXd out(k, k);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) out(i, j) = m(keep[static_cast<std::size_t>(i)], keep[static_cast<std::size_t>(j)]);
  return out;
}

}  // namespace

std::vector<Index> active_columns(const MatrixXd& lambda, const VectorXd& sigma2, Criterion criterion,
                                  double eps, double t) {
  std::vector<Index> out;
  if (criterion == Criterion::Epsilon) {
    for (Index h = 0; h < lambda.cols(); ++h)
      if (lambda.col(h).cwiseAbs().maxCoeff() >= eps) out.push_back(h);
    return out;
  }
  const VectorXd norms = lambda.colwise().squaredNorm().transpose();
  const double trace_sigma = sigma2.sum();
  const double total = norms.sum() + trace_sigma;
  if (!(total > 0.0)) return out;
  const std::vector<Index> order = ranked_columns(lambda);
  double explained = trace_sigma;
  for (Index h : order) {
    if (explained / total >= t) break;
    if (!(norms(h) > 0.0)) break;
    explained += norms(h);
    out.push_back(h);
  }
  std::sort(out.begin(), out.end());
  return out;
}

int effective_k(const MatrixXd& lambda, const VectorXd& sigma2, Criterion criterion, double eps, double t) {
  return static_cast<int>(active_columns(lambda, sigma2, criterion, eps, t).size());
}

double adaptation_probability(long iteration, double alpha0, double alpha1) {
  return std::exp(alpha0 + alpha1 * static_cast<double>(iteration));
}

MatrixXd augment_partial(const MatrixXd& p, Rng& rng) {
  const Index k = p.rows();
  MatrixXd out = MatrixXd::Zero(k + 1, k + 1);
  out.topLeftCorner(k, k) = p;
  const double r_min = k > 0 ? min_singular_value(p) : 1.0;
  out(k, k) = rng.uniform(0.0, r_min);
  if (!(max_singular_value(out) < 1.0))
    throw InternalError("augmented partial autocorrelation has a singular value >= 1");
  return out;
}

bool adapt_truncation(ChainState& state, const FactorModelSpec& spec, const Dataset& data, int kstar,
                      long iteration, const SamplerConfig& config, Rng& rng, AdaptEvent* event) {
  (void)data;
  if (!config.adapt || iteration < config.adapt_start) return false;
  if (!(rng.uniform() < adaptation_probability(iteration, config.alpha0, config.alpha1))) return false;
  const int h = static_cast<int>(state.h());
  const int h_max = max_truncation(static_cast<int>(spec.p));
  AdaptEvent ev;
  ev.iteration = iteration;
  ev.h_before = h;

  if (kstar < h) {
    std::vector<Index> keep = active_columns(state.lambda, state.sigma2, config.criterion, config.epsilon, config.t);
    if (keep.empty()) keep.push_back(ranked_columns(state.lambda).front());
    // Keep the precisions of retained columns; rho is re-derived as ratios.
    const VectorXd tau = mgp_precisions(state.mgp);
    VectorXd rho(static_cast<Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i)
      rho(static_cast<Index>(i)) = i == 0 ? tau(keep[0]) : tau(keep[i]) / tau(keep[i - 1]);
    state.mgp.rho = rho;
    state.lambda = select_columns(state.lambda, keep);
    state.eta = select_columns(state.eta, keep);
    if (spec.dynamic())
      for (MatrixXd& a : state.a) a = p_to_a(principal_submatrix(a_to_p(a), keep));
    ev.action = "delete";
  } else if (kstar >= h && h < h_max) {
    const double rho_new = rng.gamma(state.mgp.a2, 1.0);
    state.mgp.rho.conservativeResize(h + 1);
    state.mgp.rho(h) = rho_new;
    const double psi = 1.0 / mgp_precisions(state.mgp)(h);
    // Column of Lambda from its prior N(0, psi * row covariance).
    MatrixXd row_cov;
    if (spec.matrix_t()) row_cov = inverse_spd(state.s, "S inverse");
    else row_cov = factorize_phi(state_phi(state, spec)).phi;
    const VectorXd col = std::sqrt(psi) * cholesky_lower(row_cov, "Lambda column prior") * rng.normal_vector(spec.p);
    state.lambda.conservativeResize(Eigen::NoChange, h + 1);
    state.lambda.col(h) = col;
    state.eta.conservativeResize(Eigen::NoChange, h + 1);
    state.eta.col(h) = rng.normal_vector(state.eta.rows());
    if (spec.dynamic())
      for (MatrixXd& a : state.a) a = p_to_a(augment_partial(a_to_p(a), rng));
    ev.action = "add";
  } else {
    return false;
  }
  ev.h_after = static_cast<int>(state.h());
  if (state.h() > h_max) throw InternalError("truncation exceeded max_truncation(p)");
  if (event) *event = ev;
  return true;
}

}  // namespace sfm
