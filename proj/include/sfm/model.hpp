#pragma once

// Model description, data bundle, chain state and sampler settings shared by
// the inference and post-processing layers.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "sfm/linalg.hpp"
#include "sfm/structured_prior.hpp"

namespace sfm {

enum class ModelKind { Static, Dynamic, Probit };
enum class PriorKind { MatrixNormal, MatrixT };
enum class MeanKind { Constant, Regression, Hierarchical };
enum class Criterion { Epsilon, Proportion };

const char* to_string(ModelKind k);
const char* to_string(PriorKind k);
const char* to_string(MeanKind k);
const char* to_string(Criterion c);
ModelKind model_kind_from_string(const std::string& s);
PriorKind prior_kind_from_string(const std::string& s);
MeanKind mean_kind_from_string(const std::string& s);
Criterion criterion_from_string(const std::string& s);

struct FactorModelSpec {
  ModelKind kind = ModelKind::Static;
  int order = 1;  // VAR order m (dynamic only)
  Index p = 0;
  Index n = 0;
  Index c = 1;  // covariates per observation (columns of W)
  Index q = 0;  // meta-covariates per variable (columns of X)
  PriorKind prior = PriorKind::MatrixNormal;
  PhiModel phi;
  double a1 = 2.0;
  double a2 = 3.0;
  double sigma_shape = 3.1;  // 1 / sigma_j^2 ~ Gam(shape, rate)
  double sigma_rate = 2.1;
  MeanKind mean = MeanKind::Constant;
  double s_beta2 = 10.0;
  double s_kappa2 = 10.0;
  double varsigma_rate = 1.0;  // varsigma_check ~ Exp(rate)

  /// Throws ArgumentError / DataError describing the first inconsistency.
  void validate() const;
  bool dynamic() const noexcept { return kind == ModelKind::Dynamic; }
  bool probit() const noexcept { return kind == ModelKind::Probit; }
  bool matrix_t() const noexcept { return prior == PriorKind::MatrixT; }
  /// Canonical JSON form; its FNV-1a digest identifies the model in manifests.
  nlohmann::json canonical() const;
};

struct Dataset {
  MatrixXd y;  // n x p observations (0/1 for probit)
  MatrixXd w;  // n x c covariates
  MatrixXd x;  // p x q meta-covariates (hierarchical mean only)
  std::vector<std::string> labels;

  Index n() const noexcept { return y.rows(); }
  Index p() const noexcept { return y.cols(); }
  /// Shape and content checks against the model.
  void validate(const FactorModelSpec& spec) const;
};

/// Covariates for a constant mean: a single column of ones.
MatrixXd intercept_covariates(Index n);

struct ChainState {
  MatrixXd lambda;  // p x H
  MatrixXd eta;     // n x H static; (n + m) x H dynamic, row r holds eta_{r + 1 - m}
  VectorXd sigma2;  // p
  MatrixXd beta;    // p x c; row j holds the mean coefficients of variable j
  MatrixXd kappa;   // q x c
  VectorXd theta;
  MgpState mgp;
  MatrixXd s;                   // matrix-t auxiliary precision
  double varsigma_check = 1.0;  // 1 / (dof - 4)
  std::vector<MatrixXd> a;      // dynamic: A_1..A_m
  MatrixXd z;                   // probit latent utilities, n x p

  Index h() const noexcept { return lambda.cols(); }
  double dof() const noexcept { return 4.0 + 1.0 / varsigma_check; }

  nlohmann::json to_json() const;
  static ChainState from_json(const nlohmann::json& j);
};

struct SamplerConfig {
  long iterations = 1000;  // post burn-in iterations
  long burn_in = 500;
  long thin = 1;
  std::uint64_t seed = 1;
  int chain_id = 0;

  int initial_h = 0;  // 0: min(max_truncation(p), 10)
  bool adapt = true;
  double alpha0 = -1.0;
  double alpha1 = -5e-4;
  long adapt_start = 20;

  Criterion criterion = Criterion::Proportion;
  double epsilon = 1e-4;
  double t = 0.999;

  double mala_step = 0.05;
  int mala_block = 4;
  VectorXd theta_scales;  // empty: 0.5 per component
  double varsigma_scale = 0.5;
  bool adapt_scales = true;  // Robbins-Monro during burn-in only

  bool store_factors = false;
  long checkpoint_every = 0;  // 0 disables
  long stop_after = -1;       // testing: stop after this many iterations (with checkpoint)

  void validate() const;
  nlohmann::json canonical() const;
};

std::uint64_t fnv1a64(const std::string& bytes);
std::string digest_hex(std::uint64_t digest);

}  // namespace sfm
