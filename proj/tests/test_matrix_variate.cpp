#include "doctest.h"

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "sfm/errors.hpp"
#include "sfm/matrix_variate.hpp"

using namespace sfm;

namespace {
SpdMatrix diag(std::initializer_list<double> v) {
  VectorXd d(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) d(i++) = x;
  return SpdMatrix(d.asDiagonal().toDenseMatrix());
}
}  // namespace

TEST_CASE("matrix normal draws are seed-deterministic") {
  MatrixNormalParams mn{MatrixXd::Zero(3, 2), SpdMatrix::identity(3), diag({1, 2})};
  Rng a(7), b(7);
  CHECK(sample_matrix_normal(mn, a) == sample_matrix_normal(mn, b));
  MatrixNormalParams bad{MatrixXd::Zero(2, 2), SpdMatrix::identity(3), diag({1, 2})};
  CHECK_THROWS_AS(sample_matrix_normal(bad, a), ArgumentError);
}

TEST_CASE("matrix normal Delta mean and covariance by Monte Carlo") {
  MatrixNormalParams mn{MatrixXd::Zero(2, 2), SpdMatrix::identity(2), diag({1, 2})};
  Rng rng(101);
  const int draws = 100000;
  std::vector<double> d00, d01, d11;
  for (int i = 0; i < draws; ++i) {
    const MatrixXd l = sample_matrix_normal(mn, rng);
    const MatrixXd d = l * l.transpose();
    d00.push_back(d(0, 0));
    d01.push_back(d(0, 1));
    d11.push_back(d(1, 1));
  }
  const MatrixXd mean = delta_mean_mn(mn.phi, mn.psi);
  CHECK(mean.isApprox(3.0 * MatrixXd::Identity(2, 2)));
  const auto e00 = oracle::variance_estimate(d00);
  const auto e01 = oracle::variance_estimate(d01);
  CHECK(std::abs(e00.mean - mean(0, 0)) < 3 * e00.se_mean);
  CHECK(std::abs(e01.mean - mean(0, 1)) < 3 * e01.se_mean);
  CHECK(std::abs(e00.var - delta_cov_mn(mn.phi, mn.psi, 0, 0, 0, 0)) < 3 * e00.se_var);
  CHECK(std::abs(e01.var - delta_cov_mn(mn.phi, mn.psi, 0, 1, 0, 1)) < 3 * e01.se_var);
  const auto c = oracle::covariance_estimate(d00, d11);
  CHECK(std::abs(c.first - delta_cov_mn(mn.phi, mn.psi, 0, 0, 1, 1)) < 3 * c.second);
}

TEST_CASE("delta_mean_mn closed forms") {
  MatrixXd phi(2, 2);
  phi << 1, .5, .5, 1;
  const MatrixXd m = delta_mean_mn(SpdMatrix(phi), diag({2}));
  MatrixXd expect(2, 2);
  expect << 2, 1, 1, 2;
  CHECK(m.isApprox(expect));
  CHECK(delta_mean_mn(SpdMatrix::identity(3), diag({0.5, 0.5, 0.5, 0.5}))
            .isApprox(2.0 * MatrixXd::Identity(3, 3)));
}

TEST_CASE("delta_cov_mn identities") {
  CHECK(delta_cov_mn(SpdMatrix::identity(3), SpdMatrix::identity(4), 0, 0, 0, 0) == 8.0);
  CHECK(delta_cov_mn(SpdMatrix::identity(3), SpdMatrix::identity(4), 0, 0, 1, 1) == 0.0);
  CHECK_THROWS_AS(delta_cov_mn(SpdMatrix::identity(3), SpdMatrix::identity(4), 0, 3, 1, 1),
                  ArgumentError);
  Rng rng(2);
  const SpdMatrix phi(oracle::random_spd(4, rng));
  const SpdMatrix psi(oracle::random_spd(2, rng));
  std::vector<Index> perm = {2, 0, 3, 1};
  MatrixXd permuted(4, 4);
  for (Index a = 0; a < 4; ++a)
    for (Index b = 0; b < 4; ++b) permuted(a, b) = phi(perm[a], perm[b]);
  const SpdMatrix phi_perm(permuted);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j)
      for (Index k = 0; k < 4; ++k)
        for (Index l = 0; l < 4; ++l) {
          const double v = delta_cov_mn(phi, psi, i, j, k, l);
          CHECK(v == doctest::Approx(delta_cov_mn(phi, psi, k, l, i, j)));
          CHECK(v == doctest::Approx(delta_cov_mn(phi, psi, j, i, k, l)));
          CHECK(delta_cov_mn(phi_perm, psi, i, j, k, l) ==
                doctest::Approx(delta_cov_mn(phi, psi, perm[i], perm[j], perm[k], perm[l])));
        }
}

TEST_CASE("Wishart sampler") {
  Rng rng(17);
  CHECK_THROWS_AS(sample_wishart(2.0, SpdMatrix::identity(3), rng), DomainError);
  oracle::Moments scalar;
  for (int i = 0; i < 100000; ++i) scalar.add(sample_wishart(5.0, SpdMatrix::identity(1), rng)(0, 0));
  CHECK(std::abs(scalar.mean - 5.0) < 3 * scalar.se());
  std::vector<oracle::Moments> m(9);
  for (int i = 0; i < 100000; ++i) {
    const SpdMatrix w = sample_wishart(10.0, SpdMatrix::identity(3), rng);
    for (Index a = 0; a < 9; ++a) m[static_cast<std::size_t>(a)].add(w(a / 3, a % 3));
  }
  for (Index a = 0; a < 9; ++a) {
    const double target = (a / 3 == a % 3) ? 10.0 : 0.0;
    CHECK(std::abs(m[static_cast<std::size_t>(a)].mean - target) < 3.5 * m[static_cast<std::size_t>(a)].se());
  }
}

TEST_CASE("matrix-t mean and large-dof limit") {
  Rng rng(23);
  MatrixTParams t{6.0, MatrixXd::Zero(3, 2), SpdMatrix(4.0 * MatrixXd::Identity(3, 3)),
                  SpdMatrix::identity(2)};
  const MatrixXd mean = delta_mean_t(t.dof, t.phi_breve, t.psi);
  CHECK(mean.isApprox(2.0 * MatrixXd::Identity(3, 3)));
  std::vector<double> d00, d01;
  for (int i = 0; i < 100000; ++i) {
    const MatrixXd l = sample_matrix_t(t, rng);
    const MatrixXd d = l * l.transpose();
    d00.push_back(d(0, 0));
    d01.push_back(d(0, 1));
  }
  const auto e00 = oracle::variance_estimate(d00);
  const auto e01 = oracle::variance_estimate(d01);
  CHECK(std::abs(e00.mean - 2.0) < 3 * e00.se_mean);
  CHECK(std::abs(e01.mean) < 3 * e01.se_mean);

  Rng a(5), b(5);
  CHECK(sample_matrix_t(t, a) == sample_matrix_t(t, b));

  // dof -> infinity: vec(Lambda) covariance approaches Psi (x) PhiBreve / dof.
  MatrixXd psi(2, 2);
  psi << 1.0, 0.3, 0.3, 0.5;
  MatrixXd pb(3, 3);
  pb << 2, 0.5, 0, 0.5, 1, 0.2, 0, 0.2, 1.5;
  const double dof = 1e6;
  MatrixTParams big{dof, MatrixXd::Zero(3, 2), SpdMatrix(pb * dof), SpdMatrix(psi)};
  MatrixXd acc = MatrixXd::Zero(6, 6);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const MatrixXd l = sample_matrix_t(big, rng);
    const VectorXd v = Eigen::Map<const VectorXd>(l.data(), 6);
    acc += v * v.transpose();
  }
  acc /= n;
  MatrixXd kron(6, 6);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 2; ++j) kron.block(3 * i, 3 * j, 3, 3) = psi(i, j) * pb;
  CHECK((acc - kron).norm() / kron.norm() < 0.05);
}

TEST_CASE("matrix-t moment domains") {
  const SpdMatrix eye = SpdMatrix::identity(2);
  CHECK(delta_mean_t(3.0, eye, SpdMatrix::identity(4)).isApprox(4.0 * MatrixXd::Identity(2, 2)));
  CHECK_THROWS_WITH_AS(delta_mean_t(2.0, eye, eye), doctest::Contains("mean undefined"), DomainError);
  CHECK_THROWS_WITH_AS(delta_var_t(4.0, eye, eye, 0, 0), doctest::Contains("variance undefined"),
                       DomainError);
  CHECK(delta_var_t(6.0, eye, SpdMatrix::identity(1), 0, 1) == doctest::Approx(2.0));
  CHECK(delta_var_t(6.0, eye, SpdMatrix::identity(1), 0, 0) == doctest::Approx(5.0));
  CHECK(delta_var_t(1e9, eye, SpdMatrix::identity(3), 1, 1) == doctest::Approx(6.0).epsilon(1e-6));
}

TEST_CASE("matrix-t Delta variance by Monte Carlo at dof 6") {
  Rng rng(31);
  const double dof = 6.0;
  MatrixTParams t{dof, MatrixXd::Zero(2, 2), SpdMatrix((dof - 2.0) * MatrixXd::Identity(2, 2)),
                  SpdMatrix::identity(2)};
  std::vector<double> d00, d01;
  for (int i = 0; i < 400000; ++i) {
    const MatrixXd l = sample_matrix_t(t, rng);
    const MatrixXd d = l * l.transpose();
    d00.push_back(d(0, 0));
    d01.push_back(d(0, 1));
  }
  const auto e00 = oracle::variance_estimate(d00);
  const auto e01 = oracle::variance_estimate(d01);
  const SpdMatrix phi = SpdMatrix::identity(2);
  CHECK(std::abs(e00.var - delta_var_t(dof, phi, t.psi, 0, 0)) < 4 * e00.se_var);
  CHECK(std::abs(e01.var - delta_var_t(dof, phi, t.psi, 0, 1)) < 4 * e01.se_var);
}

TEST_CASE("scale factor") {
  for (int k : {1, 5, 10, 15}) CHECK(scale_factor_sk(k, 0.0) == 1.0);
  CHECK(scale_factor_sk(5, 1.0) == doctest::Approx(6.0));
  CHECK_THROWS_AS(scale_factor_sk(5, -0.1), DomainError);
  for (int k : {1, 5, 10}) {
    double prev = scale_factor_sk(k, 0.0);
    for (int g = 1; g <= 50; ++g) {
      const double v = scale_factor_sk(k, 0.1 * g);
      CHECK(v > prev);
      prev = v;
    }
  }
}

TEST_CASE("Ledermann bound") {
  CHECK(max_truncation(50) == 40);
  CHECK(max_truncation(24) == 17);
  CHECK(max_truncation(12) == 7);
  CHECK(ledermann(1) == 0.0);
  CHECK_THROWS_AS(ledermann(0), ArgumentError);
}
