#pragma once

#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>

namespace sfm {

/// Seeded random stream. Distributions are constructed per call so the whole
/// stream state is the engine state, which makes checkpoints exact.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 1, std::uint64_t stream = 0);

  double uniform();                      // (0, 1)
  double uniform(double lo, double hi);  // (lo, hi)
  double normal();
  double normal(double mean, double sd);
  double gamma(double shape, double rate = 1.0);
  double chi_squared(double dof);
  double exponential(double rate);
  std::uint64_t next_u64() { return engine_(); }

  Eigen::VectorXd normal_vector(Eigen::Index n);
  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);

  /// Draw from N(mean, 1) truncated to (0, inf) if positive, else (-inf, 0].
  double truncated_normal_sign(double mean, bool positive);

  /// Independent child stream derived from this stream's seed material.
  Rng split(std::uint64_t stream) const;

  std::string serialize() const;
  void deserialize(const std::string& state);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
  std::uint64_t stream_;
};

/// Standard normal lower-tail probability.
double normal_cdf(double x);
/// log of normal_cdf, accurate in the far lower tail.
double log_normal_cdf(double x);

}  // namespace sfm
