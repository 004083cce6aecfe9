#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "sfm/errors.hpp"
#include "sfm/stationary_var.hpp"

using namespace sfm;

namespace {

PACParams random_pac(int m, Index k, Rng& rng, double scale = 1.0) {
  PACParams pac;
  for (int i = 0; i < m; ++i) pac.a.push_back(scale * rng.normal_matrix(k, k));
  return pac;
}

MatrixXd lyapunov_variance(const VARParams& var) {
  const Index k = var.dim();
  const Index m = var.order();
  MatrixXd q = MatrixXd::Zero(k * m, k * m);
  q.topLeftCorner(k, k) = var.pi;
  return oracle::lyapunov(companion_matrix(var.gamma), q);
}

}  // namespace

TEST_CASE("a_to_p and p_to_a") {
  CHECK(a_to_p(MatrixXd::Zero(3, 3)).isZero());
  CHECK(p_to_a(MatrixXd::Zero(3, 3)).isZero());
  CHECK(a_to_p(MatrixXd::Ones(1, 1))(0, 0) == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(p_to_a(MatrixXd::Constant(1, 1, 1 / std::sqrt(2.0)))(0, 0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(p_to_a(MatrixXd::Identity(2, 2)), DomainError);
  Rng rng(1);
  for (int rep = 0; rep < 1000; ++rep) {
    const Index k = 1 + rep % 6;
    const MatrixXd a = rng.normal_matrix(k, k) * (rep % 3 + 1);
    const MatrixXd p = a_to_p(a);
    CHECK(max_singular_value(p) < 1.0);
    CHECK((p_to_a(p) - a).cwiseAbs().maxCoeff() < 1e-10 * (1 + a.cwiseAbs().maxCoeff()));
    MatrixXd pp = rng.normal_matrix(k, k);
    pp *= 0.95 / max_singular_value(pp);
    CHECK((a_to_p(p_to_a(pp)) - pp).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("VAR(1) closed form") {
  PACParams zero{{MatrixXd::Zero(2, 2)}};
  const VARParams w = pac_to_var(zero);
  CHECK(w.gamma[0].isZero());
  CHECK(w.pi.isApprox(MatrixXd::Identity(2, 2)));
  CHECK(companion_spectral_radius(w) == 0.0);

  PACParams one{{MatrixXd::Ones(1, 1)}};
  const VARParams v = pac_to_var(one);
  CHECK(v.gamma[0](0, 0) == doctest::Approx(0.70711).epsilon(1e-5));
  CHECK(v.pi(0, 0) == doctest::Approx(0.5));
  CHECK(v.gamma[0](0, 0) * v.gamma[0](0, 0) + v.pi(0, 0) == doctest::Approx(1.0));
  CHECK(companion_spectral_radius(v) == doctest::Approx(0.70711).epsilon(1e-5));

  Rng rng(2);
  const MatrixXd a = rng.normal_matrix(3, 3);
  const VARParams r = pac_to_var(PACParams{{a}});
  const MatrixXd inner = MatrixXd::Identity(3, 3) + a * a.transpose();
  CHECK((r.gamma[0] - sym_inv_sqrt_raw(inner) * a).norm() < 1e-12);
  CHECK((r.pi - inner.inverse()).norm() < 1e-12);
}

TEST_CASE("stationarity contract over random PAC parameters") {
  Rng rng(3);
  for (int rep = 0; rep < 300; ++rep) {
    const int m = 1 + rep % 3;
    const Index k = 1 + (rep / 3) % 4;
    const VARParams var = pac_to_var(random_pac(m, k, rng, 1.5));
    REQUIRE(companion_spectral_radius(var) < 1.0);
    const MatrixXd v = lyapunov_variance(var);
    CHECK((v.topLeftCorner(k, k) - MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() < 1e-8);
    // The emitted autocovariances are the off-diagonal blocks of the same solution.
    CHECK((v - stationary_state_covariance(var)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("initial distribution") {
  Rng rng(4);
  const VARParams v1 = pac_to_var(random_pac(1, 3, rng));
  CHECK(build_initial_dist(v1).isApprox(MatrixXd::Identity(3, 3)));

  // Scalar AR(2): rho_1 = g1 / (1 - g2).
  const VARParams v2 = pac_to_var(random_pac(2, 1, rng));
  const double g1 = v2.gamma[0](0, 0), g2 = v2.gamma[1](0, 0);
  const MatrixXd g = build_initial_dist(v2);
  CHECK(g(0, 0) == doctest::Approx(1.0));
  CHECK(g(0, 1) == doctest::Approx(g1 / (1 - g2)));
  CHECK(g(1, 0) == g(0, 1));
  CHECK(v2.pi(0, 0) == doctest::Approx(1 - g1 * g(0, 1) - g2 * (g1 * g(0, 1) + g2)).epsilon(1e-10));

  for (int rep = 0; rep < 50; ++rep) {
    const VARParams var = pac_to_var(random_pac(3, 2, rng));
    const MatrixXd big = build_initial_dist(var);
    CHECK(is_spd(big));
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 3; ++j)
        for (Index i2 = 0; i2 < 3; ++i2)
          for (Index j2 = 0; j2 < 3; ++j2)
            if (j - i == j2 - i2) CHECK(big.block(2 * i, 2 * j, 2, 2) == big.block(2 * i2, 2 * j2, 2, 2));
  }

  VARParams explosive;
  explosive.gamma = {MatrixXd::Constant(1, 1, 1.2)};
  explosive.pi = MatrixXd::Ones(1, 1);
  explosive.autocov = {MatrixXd::Ones(1, 1)};
  CHECK_THROWS_AS(build_initial_dist(explosive), DomainError);
}

TEST_CASE("rotate_expansion") {
  Rng rng(5);
  ExpansionPieces pieces;
  pieces.lambda = rng.normal_matrix(6, 3);
  pieces.eta = rng.normal_matrix(10, 3);
  const PACParams pac = random_pac(2, 3, rng);
  const VARParams var = pac_to_var(pac);
  pieces.gamma = var.gamma;
  pieces.pi = var.pi;
  pieces.a = pac.a;

  const ExpansionPieces same = rotate_expansion(MatrixXd::Identity(3, 3), pieces);
  CHECK(same.lambda == pieces.lambda);
  CHECK(same.gamma[1] == pieces.gamma[1]);

  CHECK_THROWS_AS(rotate_expansion(MatrixXd::Ones(3, 3), pieces), ArgumentError);

  const MatrixXd q = orthogonal_from_normals(rng.normal_matrix(3, 3));
  const ExpansionPieces r = rotate_expansion(q, pieces);
  CHECK((r.lambda * r.lambda.transpose() - pieces.lambda * pieces.lambda.transpose()).norm() < 1e-10);
  // Fitted means Lambda eta_t are invariant, hence the observation likelihood.
  CHECK((r.eta * r.lambda.transpose() - pieces.eta * pieces.lambda.transpose()).norm() < 1e-10);
  for (std::size_t i = 0; i < 2; ++i) {
    Eigen::EigenSolver<MatrixXd> e1(pieces.gamma[i]), e2(r.gamma[i]);
    std::vector<double> a1, a2;
    for (Index j = 0; j < 3; ++j) {
      a1.push_back(std::abs(e1.eigenvalues()(j)));
      a2.push_back(std::abs(e2.eigenvalues()(j)));
    }
    std::sort(a1.begin(), a1.end());
    std::sort(a2.begin(), a2.end());
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(a1[j] - a2[j]) < 1e-10);
    // Rotating A rotates the induced VAR the same way.
  }
  const VARParams rv = pac_to_var(PACParams{r.a});
  for (std::size_t i = 0; i < 2; ++i) CHECK((rv.gamma[i] - r.gamma[i]).norm() < 1e-10);
  CHECK((rv.pi - r.pi).norm() < 1e-10);
  CHECK(pieces.a[0].squaredNorm() == doctest::Approx(r.a[0].squaredNorm()));
}

TEST_CASE("jet derivatives of the VAR map match finite differences") {
  Rng rng(6);
  const int m = 2;
  const Index k = 3;
  const PACParams pac = random_pac(m, k, rng);
  std::vector<std::pair<Index, Index>> entries;
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) entries.emplace_back(i, j);
  // Differentiate with respect to the entries of A_2 only; A_1 is held fixed.
  std::vector<MatJet> pj;
  MatJet a1(pac.a[0]);
  a1.d.assign(entries.size(), MatrixXd::Zero(k, k));
  pj.push_back(a_to_p_generic(a1));
  pj.push_back(a_to_p_generic(MatJet::seed(pac.a[1], entries)));
  const VarPieces<MatJet> jet = pac_to_var_generic(pj);
  for (std::size_t dir = 0; dir < entries.size(); ++dir) {
    const auto [i, j] = entries[dir];
    const double h = 1e-6 * (1 + std::abs(pac.a[1](i, j)));
    PACParams up = pac, dn = pac;
    up.a[1](i, j) += h;
    dn.a[1](i, j) -= h;
    const VARParams vu = pac_to_var(up), vd = pac_to_var(dn);
    const MatrixXd fd_pi = (vu.pi - vd.pi) / (2 * h);
    const MatrixXd fd_g0 = (vu.gamma[0] - vd.gamma[0]) / (2 * h);
    CHECK((jet.pi.d[dir] - fd_pi).norm() < 1e-6 * (1 + fd_pi.norm()));
    CHECK((jet.gamma[0].d[dir] - fd_g0).norm() < 1e-6 * (1 + fd_g0.norm()));
  }
}
