#include "sfm/model_post.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "sfm/errors.hpp"
#include "sfm/inference.hpp"

namespace sfm {

namespace {

using nlohmann::json;

constexpr double kLog2Pi = 1.8378770664093454836;

json matrix_json(const MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

// Inverse-ECDF order statistic: the smallest value with ECDF >= prob.
template <typename T>
T order_statistic(const std::vector<T>& sorted, double prob) {
  const auto n = static_cast<double>(sorted.size());
  auto idx = static_cast<long>(std::ceil(prob * n)) - 1;
  idx = std::clamp<long>(idx, 0, static_cast<long>(sorted.size()) - 1);
  return sorted[static_cast<std::size_t>(idx)];
}

double interpolated_quantile(const std::vector<double>& sorted, double prob) {
  const double pos = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Index dim(const DrawStore& store, const char* key) { return store.manifest.at("dims").at(key).get<Index>(); }

MatrixXd draw_lambda(const DrawStore& store, Index d) {
  return store.matrix("lambda", d, dim(store, "p"), store.h.at(static_cast<std::size_t>(d)));
}

VectorXd draw_sigma2(const DrawStore& store, Index d) { return store.matrix("sigma2", d, dim(store, "p"), 1); }

void require_draws(const DrawStore& store) {
  if (store.draws() == 0) throw ArgumentError("the draw store is empty");
}

}  // namespace

IdentifiedDraw identify_draw(const MatrixXd& lambda, const MatrixXd& eta, const std::vector<MatrixXd>& a) {
  const Index p = lambda.rows();
  const Index k = lambda.cols();
  if (k > p) throw ArgumentError("identify_draw: Lambda has more columns (" + std::to_string(k) + ") than rows (" +
                                 std::to_string(p) + ")");
  IdentifiedDraw out;
  // Lambda^T = Q_r R gives Lambda = R^T Q_r^T.
  Eigen::HouseholderQR<MatrixXd> qr(lambda.transpose());
  out.q = (qr.householderQ() * MatrixXd::Identity(k, k)).transpose();
  out.lambda = qr.matrixQR().triangularView<Eigen::Upper>().toDenseMatrix().transpose();
  const double tol = 1e-12 * lambda.norm();
  for (Index j = 0; j < k; ++j) {
    const double d = out.lambda(j, j);
    if (std::abs(d) <= tol) {
      out.rank_deficient = true;
    } else if (d < 0.0) {
      out.lambda.col(j) *= -1.0;
      out.q.row(j) *= -1.0;
    }
  }
  if (eta.size() > 0) {
    if (eta.cols() != k) throw ArgumentError("identify_draw: factors and loadings disagree on the number of factors");
    out.eta = eta * out.q.transpose();
  }
  if (!a.empty()) {
    const VARParams var = pac_to_var(PACParams{a});
    for (const MatrixXd& ai : a) out.a.push_back(out.q * ai * out.q.transpose());
    for (const MatrixXd& g : var.gamma) out.gamma.push_back(out.q * g * out.q.transpose());
    out.pi = symmetrize(out.q * var.pi * out.q.transpose());
  }
  return out;
}

DrawStore identify_store(const DrawStore& store) {
  DrawStore out;
  out.manifest = store.manifest;
  out.manifest["identified"] = true;
  json deficient = json::array();
  for (Index d = 0; d < store.draws(); ++d) {
    const PosteriorDraw draw = decode_draw(store, d);
    const IdentifiedDraw id = identify_draw(draw.lambda, draw.eta, draw.a);
    if (id.rank_deficient) deficient.push_back(d);
    out.append("lambda", Layout::PByH, id.lambda);
    out.append("sigma2", Layout::Fixed, MatrixXd(draw.sigma2));
    if (id.eta.size() > 0) out.append("eta", Layout::RowsByH, id.eta);
    if (!id.a.empty()) {
      std::vector<double> fa, fg;
      for (std::size_t i = 0; i < id.a.size(); ++i) {
        fa.insert(fa.end(), id.a[i].data(), id.a[i].data() + id.a[i].size());
        fg.insert(fg.end(), id.gamma[i].data(), id.gamma[i].data() + id.gamma[i].size());
      }
      out.append("a", Layout::MByHByH, fa);
      out.append("gamma", Layout::MByHByH, fg);
      out.append("pi", Layout::HByH, id.pi);
    }
    out.next_draw(store.h[static_cast<std::size_t>(d)]);
  }
  out.manifest["rank_deficient"] = deficient;
  return out;
}

KSummary summarize_k(std::vector<int> values) {
  if (values.empty()) throw ArgumentError("no draws to summarize");
  KSummary s;
  s.values = values;
  std::sort(values.begin(), values.end());
  std::map<int, int> counts;
  for (int v : values) ++counts[v];
  int best = -1;
  for (const auto& [k, c] : counts)
    if (c > best) {
      best = c;
      s.mode = k;
    }
  s.median = order_statistic(values, 0.5);
  s.lower = order_statistic(values, 0.025);
  s.upper = order_statistic(values, 0.975);
  return s;
}

KSummary k_posterior_summary(const DrawStore& store, Criterion criterion, double eps, double t) {
  require_draws(store);
  std::vector<int> ks;
  ks.reserve(static_cast<std::size_t>(store.draws()));
  for (Index d = 0; d < store.draws(); ++d)
    ks.push_back(effective_k(draw_lambda(store, d), draw_sigma2(store, d), criterion, eps, t));
  return summarize_k(std::move(ks));
}

SubstepFilter::SubstepFilter(const VARParams& var, MatrixXd lambda, VectorXd sigma2)
    : lambda_(std::move(lambda)), sigma2_(std::move(sigma2)) {
  const Index k = var.pi.rows();
  if (lambda_.cols() != k) throw ArgumentError("filter: loadings have " + std::to_string(lambda_.cols()) +
                                               " columns but the VAR has " + std::to_string(k) + " factors");
  if (sigma2_.size() != lambda_.rows()) throw ArgumentError("filter: one variance per hour is required");
  transition_ = companion_matrix(var.gamma);
  const Index d = transition_.rows();
  innovation_ = MatrixXd::Zero(d, d);
  innovation_.topLeftCorner(k, k) = var.pi;
  mean_ = VectorXd::Zero(d);
  cov_ = stationary_state_covariance(var);
}

void SubstepFilter::predict_if_period_start() {
  if (position_ % hours_per_period() != 0) return;
  mean_ = transition_ * mean_;
  cov_ = symmetrize(transition_ * cov_ * transition_.transpose() + innovation_);
}

void SubstepFilter::step(double y, double mu) {
  predict_if_period_start();
  const Index k = lambda_.cols();
  const Index hour = position_ % hours_per_period();
  const VectorXd h = lambda_.row(hour).transpose();
  const VectorXd ph = cov_.leftCols(k) * h;
  const double s = h.dot(ph.head(k)) + sigma2_(hour);
  if (!(s > 0.0) || !std::isfinite(s))
    throw NumericalError("filter innovation variance is not positive", position_, "forward filter");
  const double v = y - mu - h.dot(mean_.head(k));
  mean_ += ph * (v / s);
  cov_ = symmetrize(cov_ - ph * ph.transpose() / s);
  if (cov_.diagonal().minCoeff() < -1e-12 * std::max(1.0, cov_.diagonal().maxCoeff()))
    throw NumericalError("filtered covariance lost positive definiteness", position_, "forward filter");
  ++position_;
}

void SubstepFilter::skip() {
  predict_if_period_start();
  ++position_;
}

std::vector<HourMoments> forward_filter_substep(const VARParams& var, const MatrixXd& lambda, const VectorXd& sigma2,
                                                const MatrixXd& mu, const MatrixXd& y, Index hours) {
  const Index p = lambda.rows();
  if (y.cols() != p || mu.cols() != p || mu.rows() < y.rows())
    throw ArgumentError("filter: observations and means must have one column per hour");
  if (hours < 0 || hours > y.size()) throw ArgumentError("filter: more hours requested than observed");
  SubstepFilter filter(var, lambda, sigma2);
  std::vector<HourMoments> out;
  out.reserve(static_cast<std::size_t>(hours));
  for (Index s = 0; s < hours; ++s) {
    const Index t = s / p, hr = s % p;
    filter.step(y(t, hr), mu(t, hr));
    out.push_back(HourMoments{t, hr, filter.mean(), filter.cov()});
  }
  return out;
}

std::vector<ForecastResult> forecast_h(const DrawStore& store, const MatrixXd& y, const MatrixXd& w,
                                       const std::vector<Index>& origins, Index horizon, Rng& rng) {
  require_draws(store);
  if (horizon < 1) throw ArgumentError("forecast horizon must be at least one hour");
  if (!store.has("a")) throw ArgumentError("forecasting needs draws from a dynamic model");
  const Index p = dim(store, "p");
  if (y.cols() != p) throw ArgumentError("forecast: observations must have p columns");
  std::vector<Index> sorted = origins;
  std::sort(sorted.begin(), sorted.end());
  for (Index o : sorted) {
    if (o < 0 || o > y.size()) throw ArgumentError("forecast origin " + std::to_string(o) + " is beyond the observed data");
    if ((o + horizon - 1) / p >= w.rows())
      throw ArgumentError("forecast: covariates do not cover period " + std::to_string((o + horizon - 1) / p + 1));
  }
  const Index m = store.draws();
  std::vector<ForecastResult> results(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    results[i].origin = sorted[i];
    results[i].draws.resize(m, horizon);
  }
  for (Index d = 0; d < m; ++d) {
    const PosteriorDraw draw = decode_draw(store, d);
    const VARParams var = pac_to_var(PACParams{draw.a});
    const MatrixXd mu = w * draw.beta.transpose();
    const Index k = draw.lambda.cols();
    const MatrixXd pi_chol = cholesky_lower(var.pi, "forecast innovation");
    SubstepFilter filter(var, draw.lambda, draw.sigma2);
    for (std::size_t oi = 0; oi < sorted.size(); ++oi) {
      while (filter.position() < sorted[oi]) {
        const Index s = filter.position();
        filter.step(y(s / p, s % p), mu(s / p, s % p));
      }
      VectorXd x = filter.mean() + sym_sqrt_raw(filter.cov()) * rng.normal_vector(filter.mean().size());
      for (Index j = 0; j < horizon; ++j) {
        const Index s = sorted[oi] + j;
        if (s % p == 0) {
          x = filter.transition() * x;
          x.head(k) += pi_chol * rng.normal_vector(k);
        }
        const Index hr = s % p;
        results[oi].draws(d, j) =
            mu(s / p, hr) + draw.lambda.row(hr).dot(x.head(k)) + std::sqrt(draw.sigma2(hr)) * rng.normal();
      }
    }
  }
  for (ForecastResult& r : results) {
    r.mean = r.draws.colwise().mean().transpose();
    r.lower.resize(horizon);
    r.upper.resize(horizon);
    for (Index j = 0; j < horizon; ++j) {
      std::vector<double> col(r.draws.col(j).data(), r.draws.col(j).data() + m);
      std::sort(col.begin(), col.end());
      r.lower(j) = interpolated_quantile(col, 0.025);
      r.upper(j) = interpolated_quantile(col, 0.975);
    }
  }
  return results;
}

namespace {

void check_score_inputs(const MatrixXd& probs, const MatrixXd& outcomes) {
  if (probs.rows() != outcomes.rows() || probs.cols() != outcomes.cols())
    throw ArgumentError("scores: probabilities and outcomes differ in shape");
  if (probs.size() == 0) throw ArgumentError("scores: no forecasts given");
  for (Index i = 0; i < probs.size(); ++i) {
    const double pr = probs.data()[i];
    if (!(pr >= 0.0 && pr <= 1.0)) throw ArgumentError("scores: probability " + std::to_string(pr) + " outside [0, 1]");
    const double y = outcomes.data()[i];
    if (y != 0.0 && y != 1.0) throw ArgumentError("scores: outcomes must be 0 or 1");
  }
}

}  // namespace

double brier_score(const MatrixXd& probs, const MatrixXd& outcomes) {
  check_score_inputs(probs, outcomes);
  return -(probs - outcomes).squaredNorm() / static_cast<double>(probs.size());
}

double log_score(const MatrixXd& probs, const MatrixXd& outcomes) {
  check_score_inputs(probs, outcomes);
  double total = 0.0;
  for (Index i = 0; i < probs.size(); ++i) {
    const double pr = probs.data()[i];
    const double term = outcomes.data()[i] == 1.0 ? std::log(pr) : std::log1p(-pr);
    if (std::isinf(term)) return -std::numeric_limits<double>::infinity();
    total += term;
  }
  return total / static_cast<double>(probs.size());
}

CpoResult cpo_pml(const MatrixXd& log_lik) {
  const Index m = log_lik.rows();
  if (m == 0 || log_lik.cols() == 0) throw ArgumentError("cpo_pml: empty likelihood matrix");
  CpoResult r;
  r.log_cpo.resize(log_lik.cols());
  const double log_m = std::log(static_cast<double>(m));
  for (Index i = 0; i < log_lik.cols(); ++i) {
    const double top = (-log_lik.col(i)).maxCoeff();
    if (std::isinf(top)) {
      r.log_cpo(i) = -std::numeric_limits<double>::infinity();
      continue;
    }
    const double lse = top + std::log((-log_lik.col(i).array() - top).exp().sum());
    r.log_cpo(i) = -(lse - log_m);
  }
  r.log_pml = r.log_cpo.sum();
  return r;
}

MatrixXd observation_log_likelihoods(const FactorModelSpec& spec, const DrawStore& store, const Dataset& data) {
  require_draws(store);
  if (spec.dynamic()) throw ArgumentError("predictive likelihoods are available for static and probit models only");
  const Index n = data.n(), p = data.p();
  MatrixXd out(store.draws(), n);
  for (Index d = 0; d < store.draws(); ++d) {
    const PosteriorDraw draw = decode_draw(store, d);
    const MatrixXd mu = data.w * draw.beta.transpose();
    if (spec.probit()) {
      const VectorXd scale = (draw.sigma2 + draw.lambda.rowwise().squaredNorm()).cwiseSqrt();
      for (Index i = 0; i < n; ++i) {
        double total = 0.0;
        for (Index j = 0; j < p; ++j) {
          const double z = mu(i, j) / scale(j);
          total += log_normal_cdf(data.y(i, j) == 1.0 ? z : -z);
        }
        out(d, i) = total;
      }
    } else {
      MatrixXd omega = draw.lambda * draw.lambda.transpose();
      omega.diagonal() += draw.sigma2;
      const MatrixXd l = cholesky_lower(omega, "predictive covariance");
      const double log_det = 2.0 * l.diagonal().array().log().sum();
      const MatrixXd white = l.triangularView<Eigen::Lower>().solve((data.y - mu).transpose());
      const VectorXd quad = white.colwise().squaredNorm().transpose();
      out.row(d) = (-0.5 * (static_cast<double>(p) * kLog2Pi + log_det + quad.array())).matrix().transpose();
    }
  }
  return out;
}

MatrixXd predictive_probabilities(const DrawStore& store, const MatrixXd& w) {
  require_draws(store);
  const Index p = dim(store, "p");
  MatrixXd total = MatrixXd::Zero(w.rows(), p);
  for (Index d = 0; d < store.draws(); ++d) {
    const PosteriorDraw draw = decode_draw(store, d);
    const MatrixXd mu = w * draw.beta.transpose();
    const VectorXd scale = (draw.sigma2 + draw.lambda.rowwise().squaredNorm()).cwiseSqrt();
    for (Index i = 0; i < w.rows(); ++i)
      for (Index j = 0; j < p; ++j) total(i, j) += normal_cdf(mu(i, j) / scale(j));
  }
  return total / static_cast<double>(store.draws());
}

MatrixXd posterior_mean_omega(const DrawStore& store) {
  require_draws(store);
  const Index p = dim(store, "p");
  MatrixXd total = MatrixXd::Zero(p, p);
  for (Index d = 0; d < store.draws(); ++d) {
    const MatrixXd lam = draw_lambda(store, d);
    total += lam * lam.transpose();
    total.diagonal() += draw_sigma2(store, d);
  }
  return total / static_cast<double>(store.draws());
}

std::vector<int> kfold_split(Index n, int k, std::uint64_t seed) {
  if (k < 1) throw ArgumentError("kfold_split: need at least one fold");
  if (n < k) throw ArgumentError("kfold_split: " + std::to_string(n) + " observations cannot fill " +
                                 std::to_string(k) + " folds");
  std::vector<Index> perm(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  Rng rng(seed, 0x6b666f6c64ull);
  for (Index i = n - 1; i > 0; --i) {
    const auto j = std::min<Index>(static_cast<Index>(rng.uniform() * static_cast<double>(i + 1)), i);
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  std::vector<int> folds(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) folds[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = static_cast<int>(i % k);
  return folds;
}

nlohmann::json TruthParams::to_json() const {
  json j{{"lambda", matrix_json(lambda)}, {"sigma2", matrix_json(sigma2)}, {"beta", matrix_json(beta)}};
  if (kappa.size() > 0) j["kappa"] = matrix_json(kappa);
  if (!a.empty()) {
    json aj = json::array(), gj = json::array();
    const VARParams var = pac_to_var(PACParams{a});
    for (std::size_t i = 0; i < a.size(); ++i) {
      aj.push_back(matrix_json(a[i]));
      gj.push_back(matrix_json(var.gamma[i]));
    }
    j["a"] = aj;
    j["gamma"] = gj;
    j["pi"] = matrix_json(var.pi);
  }
  return j;
}

TruthParams draw_truth(const FactorModelSpec& spec, int k, Rng& rng) {
  if (k < 1) throw ArgumentError("simulation needs at least one factor");
  TruthParams t;
  t.lambda = rng.normal_matrix(spec.p, k);
  t.sigma2.resize(spec.p);
  for (Index j = 0; j < spec.p; ++j)
    t.sigma2(j) = spec.probit() ? 1.0 : 1.0 / rng.gamma(spec.sigma_shape, spec.sigma_rate);
  t.beta = rng.normal_matrix(spec.p, spec.c);
  if (spec.mean == MeanKind::Hierarchical) t.kappa = rng.normal_matrix(spec.q, spec.c);
  if (spec.dynamic())
    for (int i = 0; i < spec.order; ++i) t.a.push_back(rng.normal_matrix(k, k));
  return t;
}

SimulatedData simulate_data(const FactorModelSpec& spec, TruthParams truth, MatrixXd w, MatrixXd x, Rng& rng) {
  const Index n = spec.n, p = spec.p;
  const Index k = truth.lambda.cols();
  if (truth.lambda.rows() != p || truth.sigma2.size() != p || truth.beta.rows() != p || truth.beta.cols() != spec.c)
    throw ArgumentError("simulation truth does not match the model dimensions");
  if (w.size() == 0) {
    w = MatrixXd::Ones(n, spec.c);
    if (spec.c > 1) w.rightCols(spec.c - 1) = rng.normal_matrix(n, spec.c - 1);
  }
  if (spec.mean == MeanKind::Hierarchical && x.size() == 0) x = rng.normal_matrix(p, spec.q);

  MatrixXd f;  // n x k factors aligned with observations
  if (spec.dynamic()) {
    if (static_cast<int>(truth.a.size()) != spec.order) throw ArgumentError("simulation truth needs one A per lag");
    const VARParams var = pac_to_var(PACParams{truth.a});
    const Index m = spec.order;
    truth.eta.resize(n + m, k);
    const VectorXd x0 = cholesky_lower(build_initial_dist(var), "stationary start") * rng.normal_vector(k * m);
    for (Index i = 0; i < m; ++i) truth.eta.row(i) = x0.segment(i * k, k).transpose();
    const MatrixXd pl = cholesky_lower(var.pi, "innovation variance");
    for (Index t = m; t < n + m; ++t) {
      VectorXd next = pl * rng.normal_vector(k);
      for (Index i = 1; i <= m; ++i) next += var.gamma[static_cast<std::size_t>(i - 1)] * truth.eta.row(t - i).transpose();
      truth.eta.row(t) = next.transpose();
    }
    f = truth.eta.bottomRows(n);
  } else {
    truth.eta = rng.normal_matrix(n, k);
    f = truth.eta;
  }
  MatrixXd noise = rng.normal_matrix(n, p);
  for (Index j = 0; j < p; ++j) noise.col(j) *= std::sqrt(truth.sigma2(j));
  const MatrixXd latent = w * truth.beta.transpose() + f * truth.lambda.transpose() + noise;

  SimulatedData out;
  out.data.w = std::move(w);
  out.data.x = std::move(x);
  if (spec.probit()) {
    truth.z = latent;
    out.data.y = (latent.array() > 0.0).cast<double>().matrix();
  } else {
    out.data.y = latent;
  }
  for (Index j = 0; j < p; ++j) out.data.labels.push_back("y" + std::to_string(j + 1));
  out.truth = std::move(truth);
  return out;
}

}  // namespace sfm
