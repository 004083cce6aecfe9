#include "doctest.h"

#include <cmath>
#include <limits>
#include <set>

#include "oracles.hpp"
#include "sfm/errors.hpp"
#include "sfm/inference.hpp"
#include "sfm/model_post.hpp"

using namespace sfm;

namespace {

MatrixXd random_plt(Index p, Index k, Rng& rng) {
  MatrixXd l = rng.normal_matrix(p, k);
  for (Index j = 0; j < k; ++j) {
    for (Index i = 0; i < j; ++i) l(i, j) = 0.0;
    l(j, j) = 0.5 + std::abs(l(j, j));
  }
  return l;
}

MatrixXd random_orthogonal(Index k, Rng& rng) { return orthogonal_from_normals(rng.normal_matrix(k, k)); }

// A store holding `copies` identical draws of a dynamic model.
DrawStore repeated_store(const MatrixXd& lambda, const VectorXd& sigma2, const MatrixXd& beta,
                         const std::vector<MatrixXd>& a, int copies) {
  DrawStore s;
  const Index k = lambda.cols();
  s.manifest["dims"] = {{"p", lambda.rows()}, {"n", 0}, {"c", beta.cols()}, {"q", 0},
                        {"m", a.size()},      {"factor_rows", 0}};
  for (int d = 0; d < copies; ++d) {
    s.append("lambda", Layout::PByH, lambda);
    s.append("sigma2", Layout::Fixed, MatrixXd(sigma2));
    s.append("beta", Layout::Fixed, beta);
    s.append("rho", Layout::ByH, MatrixXd(VectorXd::Ones(k)));
    if (!a.empty()) {
      std::vector<double> flat;
      for (const MatrixXd& ai : a) flat.insert(flat.end(), ai.data(), ai.data() + ai.size());
      s.append("a", Layout::MByHByH, flat);
    }
    s.next_draw(static_cast<int>(k));
  }
  return s;
}

// One vector Kalman update of the companion state with all p components.
void batch_update(VectorXd& mean, MatrixXd& cov, const MatrixXd& lambda, const VectorXd& sigma2, const VectorXd& resid) {
  const Index k = lambda.cols();
  MatrixXd h = MatrixXd::Zero(lambda.rows(), mean.size());
  h.leftCols(k) = lambda;
  MatrixXd s = h * cov * h.transpose();
  s.diagonal() += sigma2;
  const MatrixXd gain = cov * h.transpose() * s.inverse();
  mean += gain * (resid - h * mean);
  cov = cov - gain * h * cov;
}

}  // namespace

TEST_CASE("identify_draw fixed point and reconstruction") {
  Rng rng(1);
  const MatrixXd plt = random_plt(7, 3, rng);
  const IdentifiedDraw same = identify_draw(plt);
  CHECK((same.q - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((same.lambda - plt).cwiseAbs().maxCoeff() < 1e-12);
  for (int rep = 0; rep < 20; ++rep) {
    const MatrixXd lt = random_plt(8, 4, rng);
    const MatrixXd q0 = random_orthogonal(4, rng);
    const IdentifiedDraw id = identify_draw(lt * q0);
    CHECK((id.lambda - lt).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((id.lambda * id.q - lt * q0).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(!id.rank_deficient);
    for (Index j = 0; j < 4; ++j) {
      CHECK(id.lambda(j, j) > 0.0);
      for (Index i = 0; i < j; ++i) CHECK(id.lambda(i, j) == 0.0);
    }
  }
  MatrixXd deficient = random_plt(5, 2, rng);
  deficient.col(1) = 2.0 * deficient.col(0);
  CHECK(identify_draw(deficient).rank_deficient);
  CHECK_THROWS_AS(identify_draw(rng.normal_matrix(2, 3)), ArgumentError);
}

TEST_CASE("identified dynamic pieces do not depend on the rotation") {
  Rng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const Index k = 3, p = 9;
    ExpansionPieces base;
    base.lambda = rng.normal_matrix(p, k);
    base.eta = rng.normal_matrix(12, k);
    for (int i = 0; i < 2; ++i) base.a.push_back(rng.normal_matrix(k, k));
    const VARParams var = pac_to_var(PACParams{base.a});
    base.gamma = var.gamma;
    base.pi = var.pi;
    const ExpansionPieces r1 = rotate_expansion(random_orthogonal(k, rng), base);
    const ExpansionPieces r2 = rotate_expansion(random_orthogonal(k, rng), base);
    const IdentifiedDraw i1 = identify_draw(r1.lambda, r1.eta, r1.a);
    const IdentifiedDraw i2 = identify_draw(r2.lambda, r2.eta, r2.a);
    CHECK((i1.lambda - i2.lambda).norm() < 1e-8);
    CHECK((i1.eta - i2.eta).norm() < 1e-8);
    CHECK((i1.pi - i2.pi).norm() < 1e-8);
    for (int i = 0; i < 2; ++i) {
      CHECK((i1.gamma[static_cast<std::size_t>(i)] - i2.gamma[static_cast<std::size_t>(i)]).norm() < 1e-8);
      CHECK((i1.a[static_cast<std::size_t>(i)] - i2.a[static_cast<std::size_t>(i)]).norm() < 1e-8);
    }
  }
}

TEST_CASE("k summaries") {
  const KSummary flat = summarize_k(std::vector<int>(50, 4));
  CHECK(flat.mode == 4);
  CHECK(flat.median == 4);
  CHECK(flat.lower == 4);
  CHECK(flat.upper == 4);
  std::vector<int> v;
  for (int i = 1; i <= 40; ++i) v.push_back(i <= 20 ? 5 : (i <= 38 ? 6 : (i == 39 ? 3 : 8)));
  const KSummary s = summarize_k(v);
  CHECK(s.mode == 5);
  CHECK(s.median == 5);  // 20th of 40
  CHECK(s.lower == 3);   // 1st of 40
  CHECK(s.upper == 6);   // 39th of 40
  CHECK_THROWS_AS(summarize_k({}), ArgumentError);
}

TEST_CASE("scalar filter matches a hand-worked example") {
  // a = 0.75 gives P = Gamma = 0.6 and Pi = 0.64.
  const VARParams var = pac_to_var(PACParams{{MatrixXd::Constant(1, 1, 0.75)}});
  CHECK(var.gamma[0](0, 0) == doctest::Approx(0.6).epsilon(1e-14));
  MatrixXd y(3, 1);
  y << 1.0, -0.5, 2.0;
  const auto hours = forward_filter_substep(var, MatrixXd::Constant(1, 1, 2.0), VectorXd::Ones(1),
                                            MatrixXd::Zero(3, 1), y, 3);
  // Step 1: prior variance 1, gain 2/5.
  double m = 0.4, p = 0.2;
  CHECK(std::abs(hours[0].mean(0) - m) < 1e-12);
  CHECK(std::abs(hours[0].cov(0, 0) - p) < 1e-12);
  for (int t = 1; t < 3; ++t) {
    const double mp = 0.6 * m, pp = 0.36 * p + 0.64;
    const double gain = 2.0 * pp / (4.0 * pp + 1.0);
    m = mp + gain * (y(t, 0) - 2.0 * mp);
    p = pp - gain * 2.0 * pp;
    CHECK(std::abs(hours[static_cast<std::size_t>(t)].mean(0) - m) < 1e-12);
    CHECK(std::abs(hours[static_cast<std::size_t>(t)].cov(0, 0) - p) < 1e-12);
  }
}

TEST_CASE("hour-by-hour filtering equals the batch update at period ends") {
  Rng rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const Index p = 24, k = 1 + rep % 4, n = 6;
    const int m = 1 + rep % 2;
    std::vector<MatrixXd> a;
    for (int i = 0; i < m; ++i) a.push_back(rng.normal_matrix(k, k));
    const VARParams var = pac_to_var(PACParams{a});
    const MatrixXd lambda = rng.normal_matrix(p, k);
    const VectorXd sigma2 = (0.2 + rng.normal_vector(p).array().abs()).matrix();
    const MatrixXd mu = rng.normal_matrix(n, p);
    const MatrixXd y = rng.normal_matrix(n, p);
    const auto hours = forward_filter_substep(var, lambda, sigma2, mu, y, n * p);
    const MatrixXd f = companion_matrix(var.gamma);
    MatrixXd q = MatrixXd::Zero(f.rows(), f.rows());
    q.topLeftCorner(k, k) = var.pi;
    VectorXd mean = VectorXd::Zero(f.rows());
    MatrixXd cov = stationary_state_covariance(var);
    for (Index t = 0; t < n; ++t) {
      mean = f * mean;
      cov = f * cov * f.transpose() + q;
      batch_update(mean, cov, lambda, sigma2, (y.row(t) - mu.row(t)).transpose());
      const HourMoments& end = hours[static_cast<std::size_t>(t * p + p - 1)];
      CHECK(end.period == t);
      CHECK((end.mean - mean).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((end.cov - cov).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("zero loadings leave the filter at the propagated prior") {
  Rng rng(4);
  const VARParams var = pac_to_var(PACParams{{rng.normal_matrix(2, 2)}});
  const auto hours = forward_filter_substep(var, MatrixXd::Zero(3, 2), VectorXd::Ones(3), MatrixXd::Zero(4, 3),
                                            rng.normal_matrix(4, 3), 12);
  for (const HourMoments& h : hours) {
    CHECK(h.mean.isZero(0.0));
    CHECK((h.cov - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("forecast draws reproduce the one-step predictive") {
  Rng rng(5);
  const Index p = 4, k = 2, n = 3;
  const std::vector<MatrixXd> a{rng.normal_matrix(k, k)};
  const MatrixXd lambda = rng.normal_matrix(p, k);
  const VectorXd sigma2 = VectorXd::Constant(p, 0.3);
  const MatrixXd beta = rng.normal_matrix(p, 1);
  const int draws = 20000;
  const DrawStore store = repeated_store(lambda, sigma2, beta, a, draws);
  const MatrixXd y = rng.normal_matrix(n, p);
  const MatrixXd w = MatrixXd::Ones(n + 2, 1);
  const std::vector<Index> origins{n * p, 5};
  const auto res = forecast_h(store, y, w, origins, 6, rng);
  REQUIRE(res.size() == 2);
  CHECK(res[0].origin == 5);
  CHECK(res[1].draws.rows() == draws);
  CHECK(res[1].draws.cols() == 6);

  const VARParams var = pac_to_var(PACParams{a});
  const MatrixXd mu = w * beta.transpose();
  SubstepFilter filter(var, lambda, sigma2);
  for (Index s = 0; s < n * p; ++s) filter.step(y(s / p, s % p), mu(s / p, s % p));
  const VectorXd pm = filter.transition() * filter.mean();
  const MatrixXd pc = filter.transition() * filter.cov() * filter.transition().transpose() + filter.innovation_cov();
  const double mean1 = mu(n, 0) + lambda.row(0).dot(pm.head(k));
  const double var1 = lambda.row(0) * pc.topLeftCorner(k, k) * lambda.row(0).transpose() + sigma2(0);
  oracle::Moments mom;
  for (Index d = 0; d < draws; ++d) mom.add(res[1].draws(d, 0));
  CHECK(std::abs(mom.mean - mean1) < 4 * std::sqrt(var1 / draws));
  CHECK(std::abs(mom.var() - var1) < 4 * std::sqrt(2.0 / draws) * var1);
  for (Index j = 0; j < 6; ++j) CHECK(res[1].lower(j) < res[1].upper(j));
}

TEST_CASE("forecasts under degenerate dynamics return the mean model") {
  Rng rng(6);
  const Index p = 3;
  const std::vector<MatrixXd> a{MatrixXd::Zero(1, 1)};
  const MatrixXd beta = rng.normal_matrix(p, 2);
  const DrawStore store = repeated_store(MatrixXd::Zero(p, 1), VectorXd::Constant(p, 1e-12), beta, a, 5);
  MatrixXd w = rng.normal_matrix(6, 2);
  const auto res = forecast_h(store, rng.normal_matrix(2, p), w, {6}, 9, rng);
  const MatrixXd mu = w * beta.transpose();
  for (Index j = 0; j < 9; ++j) CHECK(std::abs(res[0].mean(j) - mu(2 + j / p, j % p)) < 1e-5);
  CHECK_THROWS_AS(forecast_h(store, rng.normal_matrix(2, p), w, {6}, 20, rng), ArgumentError);
}

TEST_CASE("scores") {
  MatrixXd y(2, 2);
  y << 1, 0, 0, 1;
  CHECK(brier_score(y, y) == 0.0);
  CHECK(log_score(y, y) == 0.0);
  const MatrixXd half = MatrixXd::Constant(2, 2, 0.5);
  CHECK(brier_score(half, y) == -0.25);
  CHECK(log_score(half, y) == std::log(0.5));
  MatrixXd wrong = y;
  wrong(0, 0) = 0.0;
  CHECK(log_score(wrong, y) == -std::numeric_limits<double>::infinity());
  MatrixXd closer = half;
  closer(0, 0) = 0.7;
  CHECK(brier_score(closer, y) > brier_score(half, y));
  CHECK(log_score(closer, y) > log_score(half, y));
  MatrixXd bad = half;
  bad(1, 1) = 1.2;
  CHECK_THROWS_AS(brier_score(bad, y), ArgumentError);
}

TEST_CASE("CPO and pseudo marginal likelihood") {
  MatrixXd one(1, 2);
  one << std::log(0.3), std::log(0.9);
  const CpoResult r1 = cpo_pml(one);
  CHECK(std::exp(r1.log_cpo(0)) == doctest::Approx(0.3).epsilon(1e-14));
  MatrixXd two(2, 1);
  two << std::log(0.2), std::log(0.8);
  CHECK(std::exp(cpo_pml(two).log_cpo(0)) == doctest::Approx(0.32).epsilon(1e-14));
  CHECK(std::exp(cpo_pml(MatrixXd::Constant(5, 1, std::log(0.4))).log_cpo(0)) == doctest::Approx(0.4).epsilon(1e-14));
  // Reciprocals that overflow in linear space.
  MatrixXd tiny(2, 1);
  tiny << -2000.0, -2001.0;
  CHECK(std::isfinite(cpo_pml(tiny).log_cpo(0)));
  MatrixXd zero(2, 2);
  zero << -1.0, -std::numeric_limits<double>::infinity(), -2.0, -1.0;
  const CpoResult rz = cpo_pml(zero);
  CHECK(rz.log_cpo(1) == -std::numeric_limits<double>::infinity());
  CHECK(rz.log_pml == -std::numeric_limits<double>::infinity());
  Rng rng(7);
  const MatrixXd ll = -rng.normal_matrix(6, 5).cwiseAbs();
  MatrixXd perm = ll.colwise().reverse().rowwise().reverse();
  CHECK(std::abs(cpo_pml(ll).log_pml - cpo_pml(perm).log_pml) < 1e-12);
}

TEST_CASE("Gaussian predictive likelihood matches a direct density") {
  Rng rng(8);
  FactorModelSpec spec;
  spec.p = 3;
  spec.n = 4;
  spec.phi = PhiModel::identity(3);
  const MatrixXd lambda = rng.normal_matrix(3, 2);
  const VectorXd sigma2 = VectorXd::Constant(3, 0.5);
  const MatrixXd beta = rng.normal_matrix(3, 1);
  DrawStore store = repeated_store(lambda, sigma2, beta, {}, 1);
  Dataset d;
  d.y = rng.normal_matrix(4, 3);
  d.w = intercept_covariates(4);
  const MatrixXd ll = observation_log_likelihoods(spec, store, d);
  MatrixXd omega = lambda * lambda.transpose();
  omega.diagonal() += sigma2;
  for (Index i = 0; i < 4; ++i) {
    const VectorXd r = d.y.row(i).transpose() - beta.col(0);
    const double direct = -0.5 * (3 * std::log(2 * M_PI) + std::log(omega.determinant()) + r.dot(omega.inverse() * r));
    CHECK(ll(0, i) == doctest::Approx(direct).epsilon(1e-12));
  }
  spec.kind = ModelKind::Probit;
  d.y = (d.y.array() > 0).cast<double>().matrix();
  const MatrixXd lp = observation_log_likelihoods(spec, store, d);
  const MatrixXd probs = predictive_probabilities(store, d.w);
  for (Index i = 0; i < 4; ++i) {
    double direct = 0;
    for (Index j = 0; j < 3; ++j) direct += std::log(d.y(i, j) == 1.0 ? probs(i, j) : 1 - probs(i, j));
    CHECK(lp(0, i) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("k-fold split") {
  const auto f = kfold_split(8, 4, 1);
  std::vector<int> counts(4, 0);
  for (int v : f) ++counts[static_cast<std::size_t>(v)];
  for (int c : counts) CHECK(c == 2);
  CHECK(kfold_split(8, 4, 1) == f);
  CHECK(kfold_split(101, 4, 3).size() == 101);
  CHECK_THROWS_AS(kfold_split(3, 4, 1), ArgumentError);
}

TEST_CASE("simulation null models and stationarity") {
  Rng rng(9);
  FactorModelSpec spec;
  spec.p = 3;
  spec.n = 20000;
  spec.phi = PhiModel::identity(3);
  TruthParams t;
  t.lambda = MatrixXd::Zero(3, 1);
  t.sigma2 = VectorXd::Ones(3);
  t.beta = MatrixXd::Zero(3, 1);
  const SimulatedData sim = simulate_data(spec, t, MatrixXd(), MatrixXd(), rng);
  CHECK(sim.data.y.rows() == 20000);
  oracle::Moments mom;
  for (Index i = 0; i < sim.data.y.rows(); ++i) mom.add(sim.data.y(i, 1));
  CHECK(std::abs(mom.mean) < 4 * std::sqrt(1.0 / 20000));
  CHECK(std::abs(mom.var() - 1.0) < 4 * std::sqrt(2.0 / 20000));

  spec.kind = ModelKind::Probit;
  const SimulatedData pr = simulate_data(spec, t, MatrixXd(), MatrixXd(), rng);
  CHECK(std::abs(pr.data.y.mean() - 0.5) < 4 * std::sqrt(0.25 / (3 * 20000)));
  CHECK_NOTHROW(pr.data.validate(spec));

  spec.kind = ModelKind::Dynamic;
  spec.n = 50000;
  TruthParams dt = draw_truth(spec, 2, rng);
  dt.a[0] = 0.5 * dt.a[0];
  const SimulatedData dyn = simulate_data(spec, dt, MatrixXd(), MatrixXd(), rng);
  CHECK(dyn.truth.eta.rows() == 50001);
  const MatrixXd g0 = dyn.truth.eta.transpose() * dyn.truth.eta / 50001.0;
  CHECK((g0 - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.08);
}
