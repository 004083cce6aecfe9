#include <cmath>
#include <limits>

#include "sfm/errors.hpp"
#include "sfm/inference.hpp"

namespace sfm {

namespace {

/// Row of `eta` holding eta_s for s in 1-m..n.
Index eta_row(Index s, int m) { return s + m - 1; }

MatrixXd assemble_blocks(const std::vector<std::vector<MatrixXd>>& blocks) {
  const Index k = blocks[0][0].rows();
  const Index m = static_cast<Index>(blocks.size());
  MatrixXd out(k * m, k * m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j) out.block(i * k, j * k, k, k) = blocks[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return out;
}

MatJet assemble_blocks(const std::vector<std::vector<MatJet>>& blocks) {
  std::vector<std::vector<MatrixXd>> values(blocks.size());
  std::size_t dirs = 0;
  for (std::size_t i = 0; i < blocks.size(); ++i)
    for (const MatJet& b : blocks[i]) {
      values[i].push_back(b.value);
      dirs = std::max(dirs, b.directions());
    }
  MatJet out(assemble_blocks(values));
  if (dirs == 0) return out;
  const Index k = blocks[0][0].rows();
  for (std::size_t d = 0; d < dirs; ++d) {
    MatrixXd dm = MatrixXd::Zero(out.rows(), out.cols());
    for (std::size_t i = 0; i < blocks.size(); ++i)
      for (std::size_t j = 0; j < blocks[i].size(); ++j)
        if (!blocks[i][j].is_constant())
          dm.block(static_cast<Index>(i) * k, static_cast<Index>(j) * k, k, k) = blocks[i][j].d[d];
    out.d.push_back(std::move(dm));
  }
  return out;
}

template <class M, class S>
S a_log_conditional_impl(const std::vector<M>& a, const LagStats& st) {
  const std::size_t m = a.size();
  const Index k = value_of(a[0]).rows();
  std::vector<M> p;
  S log_prior(0.0);
  for (const M& ai : a) {
    p.push_back(a_to_p_generic(ai));
    log_prior = log_prior - 0.5 * mtrace(ai * mtranspose(ai));
  }
  const VarPieces<M> v = pac_to_var_generic(p);

  std::vector<std::vector<M>> blocks(m, std::vector<M>(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) blocks[i][j] = i >= j ? v.autocov[i - j] : mtranspose(v.autocov[j - i]);
  const M g = assemble_blocks(blocks);
  const double log2pi = std::log(2.0 * M_PI);
  const MatrixXd x0x0 = st.x0 * st.x0.transpose();
  S log_init = -0.5 * mlogdet_spd(g) - 0.5 * mtrace(minv(g) * M(x0x0));
  log_init = log_init - S(0.5 * static_cast<double>(k * static_cast<Index>(m)) * log2pi);

  M r(st.c[0][0]);
  for (std::size_t i = 1; i <= m; ++i) {
    r = r - v.gamma[i - 1] * M(st.c[i][0]) - M(st.c[0][i]) * mtranspose(v.gamma[i - 1]);
    for (std::size_t j = 1; j <= m; ++j) r = r + v.gamma[i - 1] * M(st.c[i][j]) * mtranspose(v.gamma[j - 1]);
  }
  const double n = static_cast<double>(st.n);
  S log_trans = -0.5 * n * mlogdet_spd(v.pi) - 0.5 * mtrace(minv(v.pi) * r);
  log_trans = log_trans - S(0.5 * n * static_cast<double>(k) * log2pi);
  return log_prior + log_init + log_trans;
}

}  // namespace

LagStats lag_stats(const MatrixXd& eta, int m) {
  LagStats st;
  st.n = eta.rows() - m;
  const Index k = eta.cols();
  st.c.assign(static_cast<std::size_t>(m + 1), std::vector<MatrixXd>(static_cast<std::size_t>(m + 1)));
  for (int i = 0; i <= m; ++i)
    for (int j = 0; j <= m; ++j)
      st.c[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          eta.middleRows(m - i, st.n).transpose() * eta.middleRows(m - j, st.n);
  st.x0.resize(k * m, 1);
  for (int i = 0; i < m; ++i) st.x0.block(i * k, 0, k, 1) = eta.row(i).transpose();
  return st;
}

double a_log_conditional(const std::vector<MatrixXd>& a, const LagStats& stats) {
  return a_log_conditional_impl<MatrixXd, double>(a, stats);
}

ScalarJet a_log_conditional_jet(const std::vector<MatrixXd>& a, const LagStats& stats, int which,
                                const std::vector<std::pair<Index, Index>>& entries) {
  std::vector<MatJet> jets;
  for (std::size_t i = 0; i < a.size(); ++i)
    jets.push_back(static_cast<int>(i) == which ? MatJet::seed(a[i], entries) : MatJet(a[i]));
  ScalarJet out = a_log_conditional_impl<MatJet, ScalarJet>(jets, stats);
  if (out.grad.size() == 0) out.grad = VectorXd::Zero(static_cast<Index>(entries.size()));
  return out;
}

// ---------------------------------------------------------------- FFBS

void ffbs_factors(ChainState& state, const FactorModelSpec& spec, const Dataset& data, Rng& rng) {
  const int m = spec.order;
  const Index k = state.h();
  const Index d = k * m;
  const Index n = data.n();
  const VARParams var = pac_to_var(PACParams{state.a});
  const MatrixXd f = companion_matrix(var.gamma);
  const MatrixXd resid = data.y - mean_matrix(state, data);
  const VectorXd inv_s2 = state.sigma2.cwiseInverse();
  const MatrixXd lt_sinv = state.lambda.transpose() * inv_s2.asDiagonal();
  const MatrixXd info = lt_sinv * state.lambda;  // Lambda^T Sigma^{-1} Lambda

  std::vector<VectorXd> means(static_cast<std::size_t>(n + 1));
  std::vector<MatrixXd> covs(static_cast<std::size_t>(n + 1));
  means[0] = VectorXd::Zero(d);
  covs[0] = stationary_state_covariance(var);
  for (Index t = 1; t <= n; ++t) {
    const VectorXd a = f * means[static_cast<std::size_t>(t - 1)];
    MatrixXd r = f * covs[static_cast<std::size_t>(t - 1)] * f.transpose();
    r.topLeftCorner(k, k) += var.pi;
    r = symmetrize(r);
    const MatrixXd l = cholesky_lower(r, "FFBS predictive covariance at t=" + std::to_string(t));
    MatrixXd prec = l.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(d, d));
    prec = prec.transpose() * prec;
    VectorXd lin = prec * a;
    prec.topLeftCorner(k, k) += info;
    lin.head(k) += lt_sinv * resid.row(t - 1).transpose();
    const MatrixXd lp = cholesky_lower(symmetrize(prec), "FFBS filtered precision at t=" + std::to_string(t));
    MatrixXd cov = lp.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(d, d));
    cov = cov.transpose() * cov;
    means[static_cast<std::size_t>(t)] = cov * lin;
    covs[static_cast<std::size_t>(t)] = symmetrize(cov);
  }

  MatrixXd eta(n + m, k);
  {
    const MatrixXd l = cholesky_lower(covs[static_cast<std::size_t>(n)], "FFBS final filtered covariance");
    const VectorXd x = means[static_cast<std::size_t>(n)] + l * rng.normal_vector(d);
    for (int b = 0; b < m; ++b) eta.row(eta_row(n - b, m)) = x.segment(b * k, k).transpose();
  }
  MatrixXd gamma_row(k, d);
  for (int i = 0; i < m; ++i) gamma_row.block(0, i * k, k, k) = var.gamma[static_cast<std::size_t>(i)];
  MatrixXd dmat = MatrixXd::Zero(d, d);
  if (m > 1) dmat.topLeftCorner(d - k, d - k).setIdentity();
  dmat.bottomRows(k) = gamma_row;
  for (Index t = n - 1; t >= 0; --t) {
    // Known: eta_t..eta_{t-m+2} (first m-1 blocks of x_t) and eta_{t+1}.
    VectorXd o(d);
    for (int b = 0; b < m - 1; ++b) o.segment(b * k, k) = eta.row(eta_row(t - b, m)).transpose();
    o.tail(k) = eta.row(eta_row(t + 1, m)).transpose();
    const VectorXd& mt = means[static_cast<std::size_t>(t)];
    const MatrixXd& ct = covs[static_cast<std::size_t>(t)];
    MatrixXd var_o = dmat * ct * dmat.transpose();
    var_o.bottomRightCorner(k, k) += var.pi;
    const MatrixXd cov_vo = ct.bottomRows(k) * dmat.transpose();  // k x d
    Eigen::LLT<MatrixXd> llt(symmetrize(var_o));
    if (llt.info() != Eigen::Success)
      throw NumericalError("FFBS backward conditioning lost positive definiteness", -1, "FFBS t=" + std::to_string(t));
    const MatrixXd gain = llt.solve(cov_vo.transpose()).transpose();
    const VectorXd mean_v = mt.tail(k) + gain * (o - dmat * mt);
    const MatrixXd cov_v = symmetrize(ct.bottomRightCorner(k, k) - gain * cov_vo.transpose());
    const MatrixXd lv = cholesky_lower(cov_v, "FFBS backward draw t=" + std::to_string(t));
    eta.row(eta_row(t - m + 1, m)) = (mean_v + lv * rng.normal_vector(k)).transpose();
  }
  state.eta = std::move(eta);
}

// ---------------------------------------------------------------- MALA

MalaStats update_A_mala_blocks(ChainState& state, const FactorModelSpec& spec, double step, int block, Rng& rng) {
  MalaStats stats;
  const int m = spec.order;
  const Index k = state.h();
  const LagStats st = lag_stats(state.eta, m);
  const Index total = k * k;
  const double eps2 = step * step;
  for (int which = 0; which < m; ++which) {
    for (Index start = 0; start < total; start += block) {
      const Index len = std::min<Index>(block, total - start);
      std::vector<std::pair<Index, Index>> entries;
      for (Index e = start; e < start + len; ++e) entries.emplace_back(e / k, e % k);
      ++stats.proposed;
      const ScalarJet cur = a_log_conditional_jet(state.a, st, which, entries);
      VectorXd x(len), z = rng.normal_vector(len);
      const double log_u = std::log(rng.uniform());
      for (Index e = 0; e < len; ++e) x(e) = state.a[static_cast<std::size_t>(which)](entries[static_cast<std::size_t>(e)].first, entries[static_cast<std::size_t>(e)].second);
      if (!std::isfinite(cur.value) || !cur.grad.allFinite()) {
        ++stats.nonfinite;
        continue;
      }
      const VectorXd y = x + 0.5 * eps2 * cur.grad + step * z;
      std::vector<MatrixXd> cand = state.a;
      for (Index e = 0; e < len; ++e) cand[static_cast<std::size_t>(which)](entries[static_cast<std::size_t>(e)].first, entries[static_cast<std::size_t>(e)].second) = y(e);
      ScalarJet prop;
      try {
        prop = a_log_conditional_jet(cand, st, which, entries);
      } catch (const Error&) {
        ++stats.nonfinite;
        continue;
      }
      if (!std::isfinite(prop.value) || !prop.grad.allFinite()) {
        ++stats.nonfinite;
        continue;
      }
      const double log_q_fwd = -(y - x - 0.5 * eps2 * cur.grad).squaredNorm() / (2.0 * eps2);
      const double log_q_rev = -(x - y - 0.5 * eps2 * prop.grad).squaredNorm() / (2.0 * eps2);
      const double log_ratio = prop.value - cur.value + log_q_rev - log_q_fwd;
      if (log_u < log_ratio) {
        state.a = std::move(cand);
        ++stats.accepted;
      }
    }
  }
  return stats;
}

}  // namespace sfm
