#include "doctest.h"

#include "oracles.hpp"
#include "sfm/errors.hpp"
#include "sfm/linalg.hpp"
#include "sfm/rng.hpp"

using namespace sfm;

TEST_CASE("sym_sqrt of identity and diagonal") {
  CHECK(sym_sqrt(SpdMatrix::identity(3)).matrix().isApprox(MatrixXd::Identity(3, 3)));
  MatrixXd d = MatrixXd::Zero(2, 2);
  d(0, 0) = 4;
  d(1, 1) = 9;
  const MatrixXd r = sym_sqrt(SpdMatrix(d)).matrix();
  CHECK(r(0, 0) == doctest::Approx(2.0));
  CHECK(r(1, 1) == doctest::Approx(3.0));
  CHECK(std::abs(r(0, 1)) < 1e-15);
}

TEST_CASE("sym_sqrt squares back for random SPD matrices") {
  Rng rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    const Index n = 1 + static_cast<Index>(rep % 20);
    const MatrixXd s = oracle::random_spd(n, rng);
    const MatrixXd x = sym_sqrt(SpdMatrix(s)).matrix();
    CHECK((x - x.transpose()).norm() == 0.0);
    CHECK((x * x - s).norm() / s.norm() < 1e-12);
  }
}

TEST_CASE("non-SPD input names the eigenvalue") {
  MatrixXd m(2, 2);
  m << 1, 2, 2, 1;
  try {
    SpdMatrix s(m, "Phi");
    FAIL("expected DomainError");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("Phi") != std::string::npos);
    CHECK(std::string(e.what()).find("-1") != std::string::npos);
  }
  MatrixXd asym(2, 2);
  asym << 1, 0.1, 0, 1;
  CHECK_THROWS_AS(SpdMatrix{asym}, DomainError);
}

TEST_CASE("sample_from_precision has the requested moments") {
  Rng rng(3);
  const MatrixXd q = oracle::random_spd(3, rng);
  const VectorXd b = rng.normal_vector(3);
  const MatrixXd cov = q.inverse();
  const VectorXd mean = cov * b;
  const int draws = 50000;
  MatrixXd acc = MatrixXd::Zero(3, 3);
  VectorXd sum = VectorXd::Zero(3);
  for (int i = 0; i < draws; ++i) {
    const VectorXd x = sample_from_precision(q, b, rng.normal_vector(3));
    sum += x;
    acc += (x - mean) * (x - mean).transpose();
  }
  sum /= draws;
  acc /= draws;
  for (Index i = 0; i < 3; ++i) CHECK(std::abs(sum(i) - mean(i)) < 4 * std::sqrt(cov(i, i) / draws));
  CHECK((acc - cov).norm() / cov.norm() < 0.03);
}

TEST_CASE("orthogonal_from_normals is orthogonal") {
  Rng rng(5);
  const MatrixXd q = orthogonal_from_normals(rng.normal_matrix(4, 4));
  CHECK((q.transpose() * q - MatrixXd::Identity(4, 4)).norm() < 1e-12);
}

TEST_CASE("rng streams are reproducible and serializable") {
  Rng a(42, 1), b(42, 1), c(42, 2);
  CHECK(a.normal() == b.normal());
  CHECK(a.next_u64() != c.next_u64());
  const std::string state = a.serialize();
  const double next = a.normal();
  Rng d;
  d.deserialize(state);
  CHECK(d.normal() == next);
}

TEST_CASE("truncated normal respects the sign and half-normal mean") {
  Rng rng(9);
  oracle::Moments m;
  for (int i = 0; i < 100000; ++i) {
    const double z = rng.truncated_normal_sign(0.0, true);
    REQUIRE(z > 0.0);
    m.add(z);
  }
  CHECK(std::abs(m.mean - std::sqrt(2.0 / M_PI)) < 3 * m.se());
  for (int i = 0; i < 1000; ++i) {
    CHECK(rng.truncated_normal_sign(3.0, false) <= 0.0);
    CHECK(rng.truncated_normal_sign(-6.0, true) > 0.0);
  }
}

TEST_CASE("normal cdf tails") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(log_normal_cdf(-40.0) == doctest::Approx(-804.6084420137538).epsilon(1e-9));
  CHECK(std::isfinite(log_normal_cdf(-1e3)));
}
