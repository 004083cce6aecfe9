#pragma once

// Parameter-expanded MCMC for the static, probit and dynamic factor models.
// Every update_* function draws one block from its full conditional (or runs
// one Metropolis step that leaves it invariant) and mutates the state in place.

#include <string>
#include <vector>

#include "sfm/matjet.hpp"
#include "sfm/model.hpp"
#include "sfm/rng.hpp"
#include "sfm/stationary_var.hpp"

namespace sfm {

/// n x p fitted mean W B^T.
MatrixXd mean_matrix(const ChainState& state, const Dataset& data);
/// Rows of the factor matrix aligned with the observations.
MatrixXd observed_factors(const ChainState& state, const FactorModelSpec& spec);
/// Among-row precision of Lambda: S under the matrix-t prior, Phi^{-1} otherwise.
MatrixXd lambda_row_precision(const ChainState& state, const FactorModelSpec& spec);
/// PhiModel with the state's hyperparameters.
PhiModel state_phi(const ChainState& state, const FactorModelSpec& spec);

void update_lambda(ChainState& state, const FactorModelSpec& spec, const Dataset& data, Rng& rng);
void update_eta_static(ChainState& state, const FactorModelSpec& spec, const Dataset& data, Rng& rng);
void update_sigma2(ChainState& state, const FactorModelSpec& spec, const Dataset& data, Rng& rng);
void update_B_K(ChainState& state, const FactorModelSpec& spec, const Dataset& data, Rng& rng);
void update_rho(ChainState& state, const FactorModelSpec& spec, Rng& rng);
void update_probit_latents(ChainState& state, const Dataset& data, Rng& rng);

struct MhResult {
  bool accepted = false;
  double log_ratio = 0.0;
};

/// log p(theta | rest) up to a constant, on the theta scale (no Jacobian);
/// -inf outside the support or when Phi(theta) is numerically singular.
double theta_log_target(const ChainState& state, const FactorModelSpec& spec, const VectorXd& theta);
/// Joint Gaussian random walk on the unconstrained scale with diagonal scales.
MhResult update_theta_mh(ChainState& state, const FactorModelSpec& spec, const VectorXd& scales, Rng& rng);

/// log of the marginal density of Lambda given varsigma_check with S
/// integrated out.
double log_marginal_lambda_t(const ChainState& state, const FactorModelSpec& spec, double varsigma_check);
/// Wishart full conditional draw of S given varsigma_check.
MatrixXd draw_s_conditional(const ChainState& state, const FactorModelSpec& spec, double varsigma_check,
                            Rng& rng);
void update_s(ChainState& state, const FactorModelSpec& spec, Rng& rng);
/// Log-scale random walk on varsigma_check with S drawn from its full
/// conditional only when accepted. With `draw_s_first` the candidate S is
/// materialized before the ratio is computed (debug check of S-independence).
MhResult update_S_varsigma_joint(ChainState& state, const FactorModelSpec& spec, double scale, Rng& rng,
                                 bool draw_s_first = false);

// ---------------------------------------------------------------- dynamic

/// Sample eta_{1-m..n} jointly given everything else.
void ffbs_factors(ChainState& state, const FactorModelSpec& spec, const Dataset& data, Rng& rng);

/// Lagged cross-products C_ij = sum_{t=1..n} eta_{t-i} eta_{t-j}^T, i, j = 0..m.
struct LagStats {
  std::vector<std::vector<MatrixXd>> c;
  MatrixXd x0;  // (eta_{1-m}, ..., eta_0) stacked in time order, km x 1
  Index n = 0;
};
LagStats lag_stats(const MatrixXd& eta, int m);

/// log p(A_1..A_m | eta) up to a constant: standard normal prior on each A_i,
/// stationary initial distribution and the VAR transition densities.
double a_log_conditional(const std::vector<MatrixXd>& a, const LagStats& stats);
/// Same value with its gradient with respect to the listed entries of A_which.
ScalarJet a_log_conditional_jet(const std::vector<MatrixXd>& a, const LagStats& stats, int which,
                                const std::vector<std::pair<Index, Index>>& entries);

struct MalaStats {
  long proposed = 0;
  long accepted = 0;
  long nonfinite = 0;
};
/// MALA over contiguous blocks of length b of the row-major entries of each A_i.
MalaStats update_A_mala_blocks(ChainState& state, const FactorModelSpec& spec, double step, int block,
                               Rng& rng);

// ---------------------------------------------------------------- truncation

/// Effective number of factors. Epsilon: columns with some |lambda_ij| >= eps.
/// Proportion: smallest k whose top-k columns (by squared norm) explain a
/// fraction >= t of tr(Lambda Lambda^T + Sigma).
int effective_k(const MatrixXd& lambda, const VectorXd& sigma2, Criterion criterion, double eps, double t);
/// Indices of the columns counted as active by effective_k, ascending.
std::vector<Index> active_columns(const MatrixXd& lambda, const VectorXd& sigma2, Criterion criterion,
                                  double eps, double t);

double adaptation_probability(long iteration, double alpha0, double alpha1);

struct AdaptEvent {
  long iteration = 0;
  int h_before = 0;
  int h_after = 0;
  std::string action;  // "delete" or "add"
};

/// Delete inactive columns or add one column, following the truncation
/// rules. `rng` must be the dedicated adaptation stream. Returns true and
/// fills `event` when H changed.
bool adapt_truncation(ChainState& state, const FactorModelSpec& spec, const Dataset& data, int kstar,
                      long iteration, const SamplerConfig& config, Rng& rng, AdaptEvent* event = nullptr);

/// Dynamic growth step on the partial autocorrelations: pad with a zero
/// row/column and a Uniform(0, r_min) diagonal entry.
MatrixXd augment_partial(const MatrixXd& p, Rng& rng);

// ---------------------------------------------------------------- sweeps

/// Per-chain tuning state carried between sweeps.
struct Tuning {
  VectorXd theta_scales;
  double varsigma_scale = 0.5;
  double mala_step = 0.05;
  int mala_block = 4;
  long theta_accepts = 0, theta_tries = 0;
  long varsigma_accepts = 0, varsigma_tries = 0;
  MalaStats mala;

  nlohmann::json to_json() const;
  static Tuning from_json(const nlohmann::json& j);
};

Tuning initial_tuning(const FactorModelSpec& spec, const SamplerConfig& config);

/// A starting state with truncation h.
ChainState initial_state(const FactorModelSpec& spec, const Dataset& data, int h, Rng& rng);

/// One systematic-scan sweep of every block for the model kind. `iteration`
/// is reported in numerical errors; `burn_in` enables Robbins-Monro tuning.
void gibbs_sweep(ChainState& state, const FactorModelSpec& spec, const Dataset& data, Tuning& tuning,
                 long iteration, bool burn_in, Rng& rng);

}  // namespace sfm
