#pragma once

// Parametric families for the among-row scale Phi(theta) (or its inverse
// Xi), generalized distances between variables, and the multiplicative gamma
// process prior on the among-column scales.

#include <string>
#include <vector>

#include "sfm/linalg.hpp"
#include "sfm/rng.hpp"

namespace sfm {

enum class PhiFamily {
  Identity,
  Exchangeable,
  BlockExchangeable,
  ARPrecision,
  CircularARPrecision,
  DistanceExponential,
};

const char* to_string(PhiFamily family);
PhiFamily phi_family_from_string(const std::string& name);

/// Inputs to the generalized distance d_ij = d_C,ij + sum_m d_m,ij / theta_{c+m}
/// where d_C is the diagonal projection (Mahalanobis) distance between the
/// rows of `coordinates` with one length-scale per column.
struct DistanceSpec {
  MatrixXd coordinates;          // p x c, may have zero columns
  std::vector<MatrixXd> metrics;  // each p x p, precomputed metric distances
  std::vector<std::string> labels;

  Index dim() const;
  Index num_length_scales() const { return coordinates.cols() + static_cast<Index>(metrics.size()); }
  /// Shape, symmetry, zero diagonal, non-negativity and sampled triangle checks.
  void validate() const;
};

/// sqrt{(x_i - x_j)^T Theta (x_i - x_j)}
double projection_distance(const VectorXd& xi, const VectorXd& xj, const MatrixXd& theta);
/// Diagonal Theta = diag(1 / length_scales^2).
double projection_distance_diag(const VectorXd& xi, const VectorXd& xj,
                                const VectorXd& length_scales);

/// Generalized distance between variables i and j; `length_scales` holds one
/// entry per coordinate column followed by one divisor per metric.
double combined_distance(const DistanceSpec& spec, const VectorXd& length_scales, Index i,
                         Index j);

/// Divide the given coordinate columns by their sample standard deviation and
/// rescale each metric so its largest entry is 2 (unit root-to-tip height for
/// an ultrametric tree). Returns the applied multiplicative factors.
std::vector<double> standardize_distance_spec(DistanceSpec& spec,
                                              const std::vector<Index>& coordinate_columns);

/// A member of one of the Phi families with its hyperparameters.
class PhiModel {
 public:
  PhiModel() = default;
  static PhiModel identity(Index p);
  static PhiModel exchangeable(Index p, double theta);
  static PhiModel block_exchangeable(std::vector<Index> block_sizes, VectorXd theta);
  static PhiModel ar_precision(Index p, double theta);
  static PhiModel circular_ar_precision(Index p, double theta);
  static PhiModel distance_exponential(DistanceSpec spec, VectorXd length_scales);

  PhiFamily family() const noexcept { return family_; }
  Index dim() const noexcept { return p_; }
  /// True when the family parameterizes Xi = Phi^{-1} rather than Phi.
  bool precision_side() const noexcept;
  const VectorXd& theta() const noexcept { return theta_; }
  Index num_params() const noexcept { return theta_.size(); }
  const std::vector<Index>& block_sizes() const noexcept { return blocks_; }
  const DistanceSpec& distance() const noexcept { return distance_; }

  /// Replace hyperparameters; DomainError if out of bounds.
  void set_theta(const VectorXd& theta);
  bool in_bounds(const VectorXd& theta) const;
  double lower_bound(Index i) const;
  double upper_bound(Index i) const;

  /// Map to and from the unconstrained sampling scale (log for positive
  /// parameters, logit-affine for intervals).
  VectorXd to_unconstrained(const VectorXd& theta) const;
  VectorXd from_unconstrained(const VectorXd& u) const;
  /// log |d theta / d u| at u.
  double log_jacobian(const VectorXd& u) const;
  /// log prior density of theta (uniform on intervals, log-normal length-scales).
  double log_prior(const VectorXd& theta) const;

  double log_theta_prior_variance = 10.0;

 private:
  PhiFamily family_ = PhiFamily::Identity;
  Index p_ = 0;
  VectorXd theta_;
  std::vector<Index> blocks_;
  DistanceSpec distance_;
};

/// Phi together with its inverse and log-determinant.
struct PhiFactors {
  MatrixXd phi;
  MatrixXd xi;
  double log_det_phi = 0.0;
};

/// Phi(theta); DomainError for out-of-bounds theta, InternalError if the
/// family produced a non-SPD matrix.
SpdMatrix build_phi(const PhiModel& model);
/// Xi(theta) = Phi(theta)^{-1}.
SpdMatrix build_xi(const PhiModel& model);
PhiFactors factorize_phi(const PhiModel& model);

/// Multiplicative gamma process: psi_h^{-1} = prod_{l <= h} rho_l with
/// rho_1 ~ Gam(a1, 1) and rho_l ~ Gam(a2, 1) for l >= 2.
struct MgpState {
  double a1 = 2.0;
  double a2 = 3.0;
  VectorXd rho;

  Index truncation() const noexcept { return rho.size(); }
};

/// psi_h = 1 / cumprod(rho)_h; InternalError if any rho_l <= 0.
VectorXd mgp_psi(const MgpState& state);
/// Column precisions tau_h = cumprod(rho)_h.
VectorXd mgp_precisions(const MgpState& state);
MgpState mgp_sample_prior(double a1, double a2, int truncation, int p, Rng& rng);

}  // namespace sfm
