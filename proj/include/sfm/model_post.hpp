#pragma once

// Post-processing of stored draws: identification by LQ decomposition,
// summaries of the effective number of factors, sub-period filtering and
// forecasting for dynamic models, and predictive scores.

#include <limits>
#include <vector>

#include "sfm/chain.hpp"
#include "sfm/draw_store.hpp"
#include "sfm/model.hpp"
#include "sfm/stationary_var.hpp"

namespace sfm {

/// Lambda = lambda_tilde * q with lambda_tilde lower trapezoidal and a
/// positive diagonal. Factors become eta * q^T (rows are time points) and the
/// VAR pieces become q X q^T.
struct IdentifiedDraw {
  MatrixXd lambda;
  MatrixXd q;
  MatrixXd eta;
  std::vector<MatrixXd> a;
  std::vector<MatrixXd> gamma;
  MatrixXd pi;
  bool rank_deficient = false;
};

/// `eta` and `a` may be empty. ArgumentError if Lambda has more columns than
/// rows.
IdentifiedDraw identify_draw(const MatrixXd& lambda, const MatrixXd& eta = MatrixXd(),
                             const std::vector<MatrixXd>& a = {});

/// Identified parameters for every stored draw. Rank-deficient draws are kept
/// in the output but listed under "rank_deficient" in the manifest.
DrawStore identify_store(const DrawStore& store);

struct KSummary {
  int mode = 0;
  int median = 0;
  int lower = 0;  // 2.5% order statistic
  int upper = 0;  // 97.5% order statistic
  std::vector<int> values;
};

KSummary summarize_k(std::vector<int> values);
KSummary k_posterior_summary(const DrawStore& store, Criterion criterion, double eps, double t);

/// Sequential Kalman filter whose state is the companion vector
/// (eta_t, ..., eta_{t-m+1}) of a stationary VAR and whose observations are
/// the components of y_t, one per sub-period ("hour"). The first hour of each
/// period is preceded by a VAR prediction step.
class SubstepFilter {
 public:
  SubstepFilter(const VARParams& var, MatrixXd lambda, VectorXd sigma2);

  Index hours_per_period() const noexcept { return lambda_.rows(); }
  /// Number of hours processed so far.
  Index position() const noexcept { return position_; }
  const VectorXd& mean() const noexcept { return mean_; }
  const MatrixXd& cov() const noexcept { return cov_; }
  const MatrixXd& transition() const noexcept { return transition_; }
  const MatrixXd& innovation_cov() const noexcept { return innovation_; }

  /// Process the next hour: `y` observed, `mu` its mean.
  void step(double y, double mu);
  /// Prediction only, as for an hour whose value is not yet known.
  void skip();

 private:
  void predict_if_period_start();

  MatrixXd lambda_;
  VectorXd sigma2_;
  MatrixXd transition_;
  MatrixXd innovation_;
  VectorXd mean_;
  MatrixXd cov_;
  Index position_ = 0;
};

struct HourMoments {
  Index period = 0;  // 0-based
  Index hour = 0;    // 0-based within the period
  VectorXd mean;
  MatrixXd cov;
};

/// Filter the first `hours` entries of y (read period by period); mu is the
/// matching mean sequence. Returns the filtered moments after every hour.
std::vector<HourMoments> forward_filter_substep(const VARParams& var, const MatrixXd& lambda,
                                                const VectorXd& sigma2, const MatrixXd& mu,
                                                const MatrixXd& y, Index hours);

struct ForecastResult {
  Index origin = 0;  // hours observed before the first forecast hour
  MatrixXd draws;    // one row per posterior draw, one column per hour ahead
  VectorXd mean;
  VectorXd lower;
  VectorXd upper;
};

/// One predictive draw per stored posterior draw for each origin. `w` must
/// cover every period touched by the forecasts; `y` needs only the observed
/// periods. Origins are counted in hours from the start of the data.
std::vector<ForecastResult> forecast_h(const DrawStore& store, const MatrixXd& y, const MatrixXd& w,
                                       const std::vector<Index>& origins, Index horizon, Rng& rng);

/// Positively oriented scores: 0 is a perfect forecast.
double brier_score(const MatrixXd& probs, const MatrixXd& outcomes);
/// -infinity if any realized outcome was given probability 0.
double log_score(const MatrixXd& probs, const MatrixXd& outcomes);

struct CpoResult {
  VectorXd log_cpo;
  double log_pml = 0.0;
};

/// From an M x n matrix of log p(y_i | theta^(m)).
CpoResult cpo_pml(const MatrixXd& log_lik);

/// log p(y_i | theta^(m)) for each stored draw (rows) and observation
/// (columns). Gaussian models use the factor-marginal N(mu_i, Lambda Lambda^T
/// + Sigma); probit models use the product over variables of the marginal
/// Bernoulli probabilities. Dynamic models are not supported.
MatrixXd observation_log_likelihoods(const FactorModelSpec& spec, const DrawStore& store, const Dataset& data);

/// Posterior predictive P(y_ij = 1) for new covariate rows `w` under a probit
/// model, averaged over stored draws.
MatrixXd predictive_probabilities(const DrawStore& store, const MatrixXd& w);

/// Posterior mean of Omega = Lambda Lambda^T + Sigma.
MatrixXd posterior_mean_omega(const DrawStore& store);

/// Balanced random partition of 0..n-1 into k folds; entry i is the fold of i.
std::vector<int> kfold_split(Index n, int k, std::uint64_t seed);

struct TruthParams {
  MatrixXd lambda;
  VectorXd sigma2;
  MatrixXd beta;
  MatrixXd kappa;
  std::vector<MatrixXd> a;
  MatrixXd eta;  // filled by simulate_data
  MatrixXd z;    // probit utilities, filled by simulate_data

  nlohmann::json to_json() const;
};

/// Parameters drawn for a simulation with k factors: N(0, 1) loadings,
/// variances from the inverse-gamma prior (1 for probit), N(0, 1) mean
/// coefficients and A matrices.
TruthParams draw_truth(const FactorModelSpec& spec, int k, Rng& rng);

struct SimulatedData {
  Dataset data;
  TruthParams truth;
};

/// y from the factor model given the truth; `w` (n x c) and `x` (p x q) are
/// taken as given, or generated (intercept plus N(0, 1) columns) when empty.
/// Dynamic factors start from the stationary distribution.
SimulatedData simulate_data(const FactorModelSpec& spec, TruthParams truth, MatrixXd w, MatrixXd x, Rng& rng);

}  // namespace sfm
