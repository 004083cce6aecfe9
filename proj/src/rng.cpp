#include "sfm/rng.hpp"

#include <cmath>
#include <sstream>

#include "sfm/errors.hpp"

namespace sfm {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32), 0x5f3759dfu};
  return std::mt19937_64(seq);
}

// N(0,1) truncated to (a, inf).
double lower_truncated_std_normal(Rng& rng, double a) {
  if (a < 0.45) {
    for (;;) {
      const double x = rng.normal();
      if (x > a) return x;
    }
  }
  // Exponential proposal with the optimal rate (Robert, 1995).
  const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double x = a + rng.exponential(alpha);
    const double d = x - alpha;
    if (rng.uniform() <= std::exp(-0.5 * d * d)) return x;
  }
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : engine_(make_engine(seed, stream)), seed_(seed), stream_(stream) {}

double Rng::uniform() {
  // 53-bit mantissa, strictly inside (0, 1).
  for (;;) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    if (u > 0.0) return u;
  }
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(engine_);
}

double Rng::normal(double mean, double sd) { return mean + sd * normal(); }

double Rng::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw DomainError("gamma draw requires positive shape and rate");
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(engine_);
}

double Rng::chi_squared(double dof) { return gamma(0.5 * dof, 0.5); }

double Rng::exponential(double rate) { return -std::log(uniform()) / rate; }

Eigen::VectorXd Rng::normal_vector(Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
  return v;
}

Eigen::MatrixXd Rng::normal_matrix(Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal();
  return m;
}

double Rng::truncated_normal_sign(double mean, bool positive) {
  if (positive) return mean + lower_truncated_std_normal(*this, -mean);
  return mean - lower_truncated_std_normal(*this, mean);
}

Rng Rng::split(std::uint64_t stream) const {
  return Rng(seed_ ^ (stream_ * 0x9e3779b97f4a7c15ull), stream + 0x1000);
}

std::string Rng::serialize() const {
  std::ostringstream os;
  os << seed_ << ' ' << stream_ << ' ' << engine_;
  return os.str();
}

void Rng::deserialize(const std::string& state) {
  std::istringstream is(state);
  is >> seed_ >> stream_ >> engine_;
  if (!is) throw DataError("corrupt RNG state");
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double log_normal_cdf(double x) {
  if (x > -5.0) return std::log(normal_cdf(x));
  // Asymptotic Mills-ratio expansion for the lower tail.
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * M_PI) + std::log(series);
}

}  // namespace sfm
