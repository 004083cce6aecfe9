#include <cmath>
#include <limits>

#include "sfm/errors.hpp"
#include "sfm/inference.hpp"
#include "sfm/kernels.hpp"
#include "sfm/matrix_variate.hpp"

namespace sfm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

const MatrixXd& response(const ChainState& state, const FactorModelSpec& spec, const Dataset& data) {
  return spec.probit() ? state.z : data.y;
}

/// Precision (or prior mean) terms for the coefficients of variable j.
VectorXd beta_prior_mean(const ChainState& state, const FactorModelSpec& spec, const Dataset& data, Index j) {
  if (spec.mean == MeanKind::Hierarchical) return state.kappa.transpose() * data.x.row(j).transpose();
  return VectorXd::Zero(spec.c);
}

}  // namespace

MatrixXd mean_matrix(const ChainState& state, const Dataset& data) {
  return data.w * state.beta.transpose();
}

MatrixXd observed_factors(const ChainState& state, const FactorModelSpec& spec) {
  if (!spec.dynamic()) return state.eta;
  return state.eta.bottomRows(state.eta.rows() - spec.order);
}

PhiModel state_phi(const ChainState& state, const FactorModelSpec& spec) {
  PhiModel phi = spec.phi;
  if (phi.num_params() > 0) phi.set_theta(state.theta);
  return phi;
}

MatrixXd lambda_row_precision(const ChainState& state, const FactorModelSpec& spec) {
  if (spec.matrix_t()) return state.s;
  return factorize_phi(state_phi(state, spec)).xi;
}

void update_lambda(ChainState& state, const FactorModelSpec& spec, const Dataset& data, Rng& rng) {
  const Index p = spec.p;
  const Index h = state.h();
  const MatrixXd xi = lambda_row_precision(state, spec);
  const VectorXd tau = mgp_precisions(state.mgp);
  const MatrixXd e = observed_factors(state, spec);
  const MatrixXd ete = e.transpose() * e;
  const MatrixXd etr = e.transpose() * (response(state, spec, data) - mean_matrix(state, data));  // H x p
  const bool diagonal_xi = xi.isDiagonal(0.0);
  MatrixXd xl = xi * state.lambda;  // p x H, kept current as rows change
  for (Index j = 0; j < p; ++j) {
    const double inv_s2 = 1.0 / state.sigma2(j);
    MatrixXd prec = inv_s2 * ete;
    prec.diagonal() += xi(j, j) * tau;
    VectorXd lin = inv_s2 * etr.col(j);
    if (!diagonal_xi) {
      const VectorXd others = xl.row(j).transpose() - xi(j, j) * state.lambda.row(j).transpose();
      lin -= tau.cwiseProduct(others);
    }
    const VectorXd row = sample_from_precision(prec, lin, rng.normal_vector(h), "Lambda row " + std::to_string(j + 1));
    if (!diagonal_xi) {
      const VectorXd delta = row - state.lambda.row(j).transpose();
      xl += xi.col(j) * delta.transpose();
    }
    state.lambda.row(j) = row.transpose();
  }
}

void update_eta_static(ChainState& state, const FactorModelSpec& spec, const Dataset& data, Rng& rng) {
  const Index h = state.h();
  const MatrixXd resid = response(state, spec, data) - mean_matrix(state, data);
  const VectorXd inv_s2 = state.sigma2.cwiseInverse();
  const MatrixXd lt_sinv = state.lambda.transpose() * inv_s2.asDiagonal();  // H x p
  MatrixXd prec = lt_sinv * state.lambda;
  prec.diagonal().array() += 1.0;
  const MatrixXd l = cholesky_lower(prec, "factor precision");
  // Means solve prec * m_i = Lambda^T Sigma^{-1} r_i for all rows at once.
  MatrixXd lin = lt_sinv * resid.transpose();  // H x n
  const auto tri = l.triangularView<Eigen::Lower>();
  tri.solveInPlace(lin);
  MatrixXd noise = rng.normal_matrix(h, resid.rows());
  lin += noise;
  tri.transpose().solveInPlace(lin);
  state.eta = lin.transpose();
}

void update_sigma2(ChainState& state, const FactorModelSpec& spec, const Dataset& data, Rng& rng) {
  if (spec.probit()) {
    state.sigma2.setOnes();
    return;
  }
  const MatrixXd resid = data.y - mean_matrix(state, data);
  const MatrixXd fit = observed_factors(state, spec) * state.lambda.transpose();
  const Index n = resid.rows();
  for (Index j = 0; j < spec.p; ++j) {
    const double rss = kernels::sum_sq_diff(resid.col(j).data(), fit.col(j).data(), static_cast<std::size_t>(n));
    const double prec = rng.gamma(spec.sigma_shape + 0.5 * static_cast<double>(n), spec.sigma_rate + 0.5 * rss);
    state.sigma2(j) = 1.0 / prec;
  }
}

void update_B_K(ChainState& state, const FactorModelSpec& spec, const Dataset& data, Rng& rng) {
  const Index c = spec.c;
  const MatrixXd resid = response(state, spec, data) - observed_factors(state, spec) * state.lambda.transpose();
  const MatrixXd wtw = data.w.transpose() * data.w;
  const MatrixXd wtr = data.w.transpose() * resid;  // c x p
  for (Index j = 0; j < spec.p; ++j) {
    const double inv_s2 = 1.0 / state.sigma2(j);
    MatrixXd prec = inv_s2 * wtw;
    prec.diagonal().array() += 1.0 / spec.s_beta2;
    const VectorXd lin = beta_prior_mean(state, spec, data, j) / spec.s_beta2 + inv_s2 * wtr.col(j);
    state.beta.row(j) = sample_from_precision(prec, lin, rng.normal_vector(c), "B row " + std::to_string(j + 1)).transpose();
  }
  if (spec.mean != MeanKind::Hierarchical) return;
  // Columns of B^T are independent regressions on X given K.
  MatrixXd prec = data.x.transpose() * data.x / spec.s_beta2;
  prec.diagonal().array() += 1.0 / spec.s_kappa2;
  const MatrixXd xtb = data.x.transpose() * state.beta / spec.s_beta2;  // q x c
  for (Index l = 0; l < c; ++l)
    state.kappa.col(l) = sample_from_precision(prec, xtb.col(l), rng.normal_vector(spec.q), "K column");
}

void update_rho(ChainState& state, const FactorModelSpec& spec, Rng& rng) {
  const Index h = state.h();
  const MatrixXd xi = lambda_row_precision(state, spec);
  const VectorXd quad = (state.lambda.transpose() * xi * state.lambda).diagonal();  // q_h
  const double p = static_cast<double>(spec.p);
  VectorXd& rho = state.mgp.rho;
  for (Index l = 0; l < h; ++l) {
    double rate = 1.0;
    double tau_minus = 1.0;  // prod_{r <= h, r != l} rho_r
    for (Index r = 0; r < l; ++r) tau_minus *= rho(r);
    for (Index hh = l; hh < h; ++hh) {
      if (hh > l) tau_minus *= rho(hh);
      rate += 0.5 * tau_minus * quad(hh);
    }
    const double shape = (l == 0 ? state.mgp.a1 : state.mgp.a2) + 0.5 * p * static_cast<double>(h - l);
    rho(l) = rng.gamma(shape, rate);
  }
}

void update_probit_latents(ChainState& state, const Dataset& data, Rng& rng) {
  const MatrixXd mu = mean_matrix(state, data) + state.eta * state.lambda.transpose();
  for (Index j = 0; j < data.y.cols(); ++j)
    for (Index i = 0; i < data.y.rows(); ++i) state.z(i, j) = rng.truncated_normal_sign(mu(i, j), data.y(i, j) > 0.5);
}

// ---------------------------------------------------------------- theta

double theta_log_target(const ChainState& state, const FactorModelSpec& spec, const VectorXd& theta) {
  PhiModel phi = spec.phi;
  if (!phi.in_bounds(theta)) return kNegInf;
  const double lp = phi.log_prior(theta);
  if (!std::isfinite(lp)) return kNegInf;
  phi.set_theta(theta);
  PhiFactors f;
  try {
    f = factorize_phi(phi);
  } catch (const Error&) {
    return kNegInf;
  }
  if (spec.matrix_t()) {
    // Wishart density of S with scale inverse PhiBreve = (dof - 2) Phi; only
    // theta-dependent terms are kept.
    const double dof = state.dof();
    const double nu = dof + static_cast<double>(spec.p) - 1.0;
    const double log_det_breve = static_cast<double>(spec.p) * std::log(dof - 2.0) + f.log_det_phi;
    return lp - 0.5 * (dof - 2.0) * (f.phi.cwiseProduct(state.s)).sum() + 0.5 * nu * log_det_breve;
  }
  const VectorXd tau = mgp_precisions(state.mgp);
  const MatrixXd xl = f.xi * state.lambda;
  double quad = 0.0;
  for (Index h = 0; h < state.h(); ++h) quad += tau(h) * state.lambda.col(h).dot(xl.col(h));
  return lp - 0.5 * static_cast<double>(state.h()) * f.log_det_phi - 0.5 * quad;
}

MhResult update_theta_mh(ChainState& state, const FactorModelSpec& spec, const VectorXd& scales, Rng& rng) {
  MhResult r;
  const PhiModel& phi = spec.phi;
  if (phi.num_params() == 0) {
    r.accepted = true;
    return r;
  }
  const VectorXd u = phi.to_unconstrained(state.theta);
  VectorXd u_new = u;
  for (Index i = 0; i < u.size(); ++i) u_new(i) += scales(i) * rng.normal();
  const VectorXd theta_new = phi.from_unconstrained(u_new);
  const double log_u = std::log(rng.uniform());
  if (u_new == u) {
    r.accepted = true;
    return r;
  }
  const double target_new = theta_log_target(state, spec, theta_new);
  if (!std::isfinite(target_new)) return r;
  r.log_ratio = target_new + phi.log_jacobian(u_new) - theta_log_target(state, spec, state.theta) -
                phi.log_jacobian(u);
  if (log_u < r.log_ratio) {
    state.theta = theta_new;
    r.accepted = true;
  }
  return r;
}

// ---------------------------------------------------------------- matrix-t

namespace {

struct TScales {
  MatrixXd phi_breve;  // (dof - 2) Phi
  double log_det_breve = 0.0;
  double nu = 0.0;  // dof + p - 1
};

TScales t_scales(const ChainState& state, const FactorModelSpec& spec, double varsigma_check) {
  const PhiFactors f = factorize_phi(state_phi(state, spec));
  const double dof = 4.0 + 1.0 / varsigma_check;
  TScales t;
  t.phi_breve = (dof - 2.0) * f.phi;
  t.log_det_breve = static_cast<double>(spec.p) * std::log(dof - 2.0) + f.log_det_phi;
  t.nu = dof + static_cast<double>(spec.p) - 1.0;
  return t;
}

MatrixXd lambda_scatter(const ChainState& state) {
  const VectorXd tau = mgp_precisions(state.mgp);
  return state.lambda * tau.asDiagonal() * state.lambda.transpose();
}

}  // namespace

double log_marginal_lambda_t(const ChainState& state, const FactorModelSpec& spec, double varsigma_check) {
  const TScales t = t_scales(state, spec, varsigma_check);
  const double p = static_cast<double>(spec.p);
  const double h = static_cast<double>(state.h());
  const VectorXd tau = mgp_precisions(state.mgp);
  const double log_det_psi = -tau.array().log().sum();
  const MatrixXd post = symmetrize(t.phi_breve + lambda_scatter(state));  // inverse of U'
  const double log_det_u = -t.log_det_breve;
  const double log_det_u_post = -log_det_spd(post);
  const int pi = static_cast<int>(spec.p);
  return -0.5 * p * h * std::log(2.0 * M_PI) - 0.5 * p * log_det_psi + 0.5 * p * h * std::log(2.0) +
         0.5 * (t.nu + h) * log_det_u_post - 0.5 * t.nu * log_det_u +
         log_multivariate_gamma(pi, 0.5 * (t.nu + h)) - log_multivariate_gamma(pi, 0.5 * t.nu);
}

MatrixXd draw_s_conditional(const ChainState& state, const FactorModelSpec& spec, double varsigma_check,
                            Rng& rng) {
  const TScales t = t_scales(state, spec, varsigma_check);
  const MatrixXd post = symmetrize(t.phi_breve + lambda_scatter(state));
  const MatrixXd scale = inverse_spd(post, "S conditional scale");
  return sample_wishart_chol(t.nu + static_cast<double>(state.h()), cholesky_lower(scale, "S conditional scale"),
                             rng);
}

void update_s(ChainState& state, const FactorModelSpec& spec, Rng& rng) {
  state.s = draw_s_conditional(state, spec, state.varsigma_check, rng);
}

MhResult update_S_varsigma_joint(ChainState& state, const FactorModelSpec& spec, double scale, Rng& rng,
                                 bool draw_s_first) {
  MhResult r;
  const double current = state.varsigma_check;
  const double proposal = current * std::exp(scale * rng.normal());
  const double log_u = std::log(rng.uniform());
  MatrixXd s_new;
  if (draw_s_first) s_new = draw_s_conditional(state, spec, proposal, rng);
  if (!(proposal > 0.0) || !std::isfinite(proposal)) return r;
  const double rate = spec.varsigma_rate;
  r.log_ratio = log_marginal_lambda_t(state, spec, proposal) - log_marginal_lambda_t(state, spec, current) -
                rate * (proposal - current) + std::log(proposal) - std::log(current);
  if (log_u < r.log_ratio) {
    r.accepted = true;
    state.varsigma_check = proposal;
    state.s = draw_s_first ? s_new : draw_s_conditional(state, spec, proposal, rng);
  }
  return r;
}

}  // namespace sfm
