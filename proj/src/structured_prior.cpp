#include "sfm/structured_prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sfm/errors.hpp"
#include "sfm/matrix_variate.hpp"

namespace sfm {

namespace {

double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }

double exchangeable_lower(Index size) {
  return size > 1 ? -1.0 / static_cast<double>(size - 1) : -1.0;
}

MatrixXd exchangeable_block(Index size, double theta) {
  MatrixXd b = MatrixXd::Constant(size, size, theta);
  b.diagonal().setOnes();
  return b;
}

constexpr double kCircularUpper = 1.0 - 1e-6;

}  // namespace

const char* to_string(PhiFamily family) {
  switch (family) {
    case PhiFamily::Identity: return "identity";
    case PhiFamily::Exchangeable: return "exchangeable";
    case PhiFamily::BlockExchangeable: return "block_exchangeable";
    case PhiFamily::ARPrecision: return "ar_precision";
    case PhiFamily::CircularARPrecision: return "circular_ar_precision";
    case PhiFamily::DistanceExponential: return "distance_exponential";
  }
  return "unknown";
}

PhiFamily phi_family_from_string(const std::string& name) {
  for (PhiFamily f : {PhiFamily::Identity, PhiFamily::Exchangeable, PhiFamily::BlockExchangeable,
                      PhiFamily::ARPrecision, PhiFamily::CircularARPrecision,
                      PhiFamily::DistanceExponential})
    if (name == to_string(f)) return f;
  throw ArgumentError("unknown Phi family '" + name + "'");
}

// ---------------------------------------------------------------- distances

Index DistanceSpec::dim() const {
  if (coordinates.cols() > 0) return coordinates.rows();
  if (!metrics.empty()) return metrics.front().rows();
  return coordinates.rows();
}

void DistanceSpec::validate() const {
  const Index p = dim();
  if (p == 0) throw DataError("distance spec is empty");
  if (num_length_scales() == 0) throw DataError("distance spec has no components");
  if (coordinates.cols() > 0 && !coordinates.allFinite())
    throw DataError("distance coordinates contain non-finite values");
  auto label = [&](Index i) {
    return i < static_cast<Index>(labels.size()) ? labels[i] : std::to_string(i);
  };
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    const MatrixXd& d = metrics[m];
    if (d.rows() != p || d.cols() != p)
      throw DataError("metric " + std::to_string(m) + " is not " + std::to_string(p) + "x" +
                      std::to_string(p));
    for (Index i = 0; i < p; ++i) {
      if (d(i, i) != 0.0)
        throw DataError("metric " + std::to_string(m) + " has non-zero diagonal at " + label(i));
      for (Index j = 0; j < p; ++j) {
        if (!(d(i, j) >= 0.0))
          throw DataError("metric " + std::to_string(m) + " has negative distance at (" +
                          label(i) + ", " + label(j) + ")");
        if (std::abs(d(i, j) - d(j, i)) > 1e-12 * std::max(1.0, std::abs(d(i, j))))
          throw DataError("metric " + std::to_string(m) + " is not symmetric at (" + label(i) +
                          ", " + label(j) + ")");
      }
    }
    Rng rng(0x7219u, m);
    const int triples = static_cast<int>(std::min<Index>(1000, p * p * p));
    for (int t = 0; t < triples; ++t) {
      const Index i = static_cast<Index>(rng.next_u64() % p);
      const Index j = static_cast<Index>(rng.next_u64() % p);
      const Index k = static_cast<Index>(rng.next_u64() % p);
      if (d(i, k) > d(i, j) + d(j, k) + 1e-9 * (1.0 + d(i, k)))
        throw DataError("metric " + std::to_string(m) + " violates the triangle inequality at (" +
                        label(i) + ", " + label(j) + ", " + label(k) + ")");
    }
  }
}

double projection_distance(const VectorXd& xi, const VectorXd& xj, const MatrixXd& theta) {
  if (xi.size() != xj.size() || theta.rows() != xi.size() || theta.cols() != xi.size())
    throw ArgumentError("projection distance: dimension mismatch");
  const VectorXd d = xi - xj;
  return std::sqrt(std::max(0.0, d.dot(theta * d)));
}

double projection_distance_diag(const VectorXd& xi, const VectorXd& xj,
                                const VectorXd& length_scales) {
  if (xi.size() != xj.size() || length_scales.size() != xi.size())
    throw ArgumentError("projection distance: dimension mismatch");
  return std::sqrt(((xi - xj).array() / length_scales.array()).square().sum());
}

double combined_distance(const DistanceSpec& spec, const VectorXd& length_scales, Index i,
                         Index j) {
  const Index c = spec.coordinates.cols();
  if (length_scales.size() != spec.num_length_scales())
    throw ArgumentError("combined distance: expected " +
                        std::to_string(spec.num_length_scales()) + " length-scales");
  const Index p = spec.dim();
  if (i < 0 || j < 0 || i >= p || j >= p) throw ArgumentError("combined distance: index out of range");
  double d = 0.0;
  if (c > 0)
    d += projection_distance_diag(spec.coordinates.row(i).transpose(),
                                  spec.coordinates.row(j).transpose(), length_scales.head(c));
  for (std::size_t m = 0; m < spec.metrics.size(); ++m) {
    const double dm = spec.metrics[m](i, j);
    if (dm < 0.0) throw DataError("negative precomputed distance");
    d += dm / length_scales(c + static_cast<Index>(m));
  }
  return d;
}

std::vector<double> standardize_distance_spec(DistanceSpec& spec,
                                              const std::vector<Index>& coordinate_columns) {
  std::vector<double> factors;
  for (Index col : coordinate_columns) {
    if (col < 0 || col >= spec.coordinates.cols())
      throw ArgumentError("standardize: coordinate column out of range");
    const auto x = spec.coordinates.col(col).array();
    const double n = static_cast<double>(x.size());
    const double sd = std::sqrt((x - x.mean()).square().sum() / std::max(1.0, n - 1.0));
    if (!(sd > 0.0)) throw DataError("cannot standardize a constant coordinate column");
    spec.coordinates.col(col) /= sd;
    factors.push_back(1.0 / sd);
  }
  for (MatrixXd& d : spec.metrics) {
    const double mx = d.maxCoeff();
    if (!(mx > 0.0)) throw DataError("cannot standardize an all-zero metric");
    d *= 2.0 / mx;
    factors.push_back(2.0 / mx);
  }
  return factors;
}

// ---------------------------------------------------------------- PhiModel

PhiModel PhiModel::identity(Index p) {
  PhiModel m;
  m.family_ = PhiFamily::Identity;
  m.p_ = p;
  m.theta_ = VectorXd(0);
  return m;
}

PhiModel PhiModel::exchangeable(Index p, double theta) {
  PhiModel m;
  m.family_ = PhiFamily::Exchangeable;
  m.p_ = p;
  m.set_theta(VectorXd::Constant(1, theta));
  return m;
}

PhiModel PhiModel::block_exchangeable(std::vector<Index> block_sizes, VectorXd theta) {
  PhiModel m;
  m.family_ = PhiFamily::BlockExchangeable;
  m.blocks_ = std::move(block_sizes);
  m.p_ = 0;
  for (Index b : m.blocks_) {
    if (b < 1) throw ArgumentError("block sizes must be positive");
    m.p_ += b;
  }
  if (theta.size() != static_cast<Index>(m.blocks_.size()))
    throw ArgumentError("block exchangeable: need one theta per block");
  m.set_theta(theta);
  return m;
}

PhiModel PhiModel::ar_precision(Index p, double theta) {
  PhiModel m;
  m.family_ = PhiFamily::ARPrecision;
  m.p_ = p;
  m.set_theta(VectorXd::Constant(1, theta));
  return m;
}

PhiModel PhiModel::circular_ar_precision(Index p, double theta) {
  PhiModel m;
  m.family_ = PhiFamily::CircularARPrecision;
  m.p_ = p;
  m.set_theta(VectorXd::Constant(1, theta));
  return m;
}

PhiModel PhiModel::distance_exponential(DistanceSpec spec, VectorXd length_scales) {
  spec.validate();
  PhiModel m;
  m.family_ = PhiFamily::DistanceExponential;
  m.p_ = spec.dim();
  if (length_scales.size() != spec.num_length_scales())
    throw ArgumentError("distance model: expected " + std::to_string(spec.num_length_scales()) +
                        " length-scales");
  m.distance_ = std::move(spec);
  m.set_theta(length_scales);
  return m;
}

bool PhiModel::precision_side() const noexcept {
  return family_ == PhiFamily::ARPrecision || family_ == PhiFamily::CircularARPrecision;
}

double PhiModel::lower_bound(Index i) const {
  switch (family_) {
    case PhiFamily::Exchangeable: return exchangeable_lower(p_);
    case PhiFamily::BlockExchangeable: return exchangeable_lower(blocks_.at(i));
    case PhiFamily::ARPrecision: return -1.0;
    case PhiFamily::CircularARPrecision: return 0.0;
    case PhiFamily::DistanceExponential: return 0.0;
    case PhiFamily::Identity: break;
  }
  return 0.0;
}

double PhiModel::upper_bound(Index) const {
  switch (family_) {
    case PhiFamily::CircularARPrecision: return kCircularUpper;
    case PhiFamily::DistanceExponential: return std::numeric_limits<double>::infinity();
    default: return 1.0;
  }
}

bool PhiModel::in_bounds(const VectorXd& theta) const {
  if (family_ == PhiFamily::Identity) return theta.size() == 0;
  const Index expected = family_ == PhiFamily::BlockExchangeable
                             ? static_cast<Index>(blocks_.size())
                         : family_ == PhiFamily::DistanceExponential ? distance_.num_length_scales()
                                                                     : 1;
  if (theta.size() != expected) return false;
  for (Index i = 0; i < theta.size(); ++i) {
    const double t = theta(i);
    if (!std::isfinite(t)) return false;
    if (family_ == PhiFamily::CircularARPrecision) {
      if (t < 0.0 || t > kCircularUpper) return false;
    } else if (!(t > lower_bound(i) && t < upper_bound(i))) {
      return false;
    }
  }
  return true;
}

void PhiModel::set_theta(const VectorXd& theta) {
  if (!in_bounds(theta)) {
    std::ostringstream os;
    os << to_string(family_) << ": hyperparameters (" << theta.transpose() << ") out of bounds";
    throw DomainError(os.str());
  }
  theta_ = theta;
}

VectorXd PhiModel::to_unconstrained(const VectorXd& theta) const {
  VectorXd u(theta.size());
  for (Index i = 0; i < theta.size(); ++i) {
    if (family_ == PhiFamily::DistanceExponential) {
      u(i) = std::log(theta(i));
    } else {
      const double lo = lower_bound(i), hi = upper_bound(i);
      const double x = (theta(i) - lo) / (hi - lo);
      u(i) = std::log(x) - std::log1p(-x);
    }
  }
  return u;
}

VectorXd PhiModel::from_unconstrained(const VectorXd& u) const {
  VectorXd theta(u.size());
  for (Index i = 0; i < u.size(); ++i) {
    if (family_ == PhiFamily::DistanceExponential) {
      theta(i) = std::exp(u(i));
    } else {
      const double lo = lower_bound(i), hi = upper_bound(i);
      theta(i) = lo + (hi - lo) * logistic(u(i));
    }
  }
  return theta;
}

double PhiModel::log_jacobian(const VectorXd& u) const {
  double out = 0.0;
  for (Index i = 0; i < u.size(); ++i) {
    if (family_ == PhiFamily::DistanceExponential) {
      out += u(i);
    } else {
      const double s = logistic(u(i));
      out += std::log(upper_bound(i) - lower_bound(i)) + std::log(s) + std::log1p(-s);
    }
  }
  return out;
}

double PhiModel::log_prior(const VectorXd& theta) const {
  if (!in_bounds(theta)) return -std::numeric_limits<double>::infinity();
  double out = 0.0;
  for (Index i = 0; i < theta.size(); ++i) {
    if (family_ == PhiFamily::DistanceExponential) {
      const double l = std::log(theta(i));
      out += -0.5 * l * l / log_theta_prior_variance -
             0.5 * std::log(2.0 * M_PI * log_theta_prior_variance) - l;
    } else {
      out -= std::log(upper_bound(i) - lower_bound(i));
    }
  }
  return out;
}

// ---------------------------------------------------------------- builders

namespace {

MatrixXd raw_phi_side(const PhiModel& model) {
  const Index p = model.dim();
  const VectorXd& theta = model.theta();
  switch (model.family()) {
    case PhiFamily::Identity: return MatrixXd::Identity(p, p);
    case PhiFamily::Exchangeable: return exchangeable_block(p, theta(0));
    case PhiFamily::BlockExchangeable: {
      MatrixXd phi = MatrixXd::Zero(p, p);
      Index start = 0;
      for (std::size_t b = 0; b < model.block_sizes().size(); ++b) {
        const Index size = model.block_sizes()[b];
        phi.block(start, start, size, size) = exchangeable_block(size, theta(static_cast<Index>(b)));
        start += size;
      }
      return phi;
    }
    case PhiFamily::DistanceExponential: {
      MatrixXd phi(p, p);
      for (Index i = 0; i < p; ++i) {
        phi(i, i) = 1.0;
        for (Index j = 0; j < i; ++j)
          phi(i, j) = phi(j, i) = std::exp(-combined_distance(model.distance(), theta, i, j));
      }
      return phi;
    }
    default: break;
  }
  throw InternalError("raw_phi_side called for a precision-side family");
}

MatrixXd raw_xi_side(const PhiModel& model) {
  const Index p = model.dim();
  const double t = model.theta()(0);
  MatrixXd xi = MatrixXd::Zero(p, p);
  if (model.family() == PhiFamily::ARPrecision) {
    for (Index i = 0; i < p; ++i) xi(i, i) = (i == 0 || i == p - 1) ? 1.0 : 1.0 + t * t;
    for (Index i = 0; i + 1 < p; ++i) xi(i, i + 1) = xi(i + 1, i) = -t;
    return xi;
  }
  xi.diagonal().setOnes();
  for (Index i = 0; i < p; ++i) {
    const Index j = (i + 1) % p;
    xi(i, j) -= 0.5 * t;
    xi(j, i) -= 0.5 * t;
  }
  return xi;
}

SpdMatrix checked(MatrixXd m, const PhiModel& model, const char* what) {
  try {
    return SpdMatrix(std::move(m), what);
  } catch (const DomainError& e) {
    if (model.family() == PhiFamily::DistanceExponential)
      throw DataError(std::string("distance model produced a singular Phi (duplicate variables?): ") +
                      e.what());
    throw InternalError(std::string(to_string(model.family())) + " produced a non-SPD matrix: " +
                        e.what());
  }
}

}  // namespace

SpdMatrix build_phi(const PhiModel& model) {
  if (!model.in_bounds(model.theta())) throw DomainError("Phi hyperparameters out of bounds");
  if (model.precision_side()) return SpdMatrix(inverse_spd(build_xi(model).matrix()), "Phi");
  return checked(raw_phi_side(model), model, "Phi");
}

SpdMatrix build_xi(const PhiModel& model) {
  if (!model.in_bounds(model.theta())) throw DomainError("Phi hyperparameters out of bounds");
  if (model.precision_side()) return checked(raw_xi_side(model), model, "Xi");
  return SpdMatrix(inverse_spd(build_phi(model).matrix()), "Xi");
}

PhiFactors factorize_phi(const PhiModel& model) {
  PhiFactors f;
  if (model.family() == PhiFamily::Identity) {
    f.phi = f.xi = MatrixXd::Identity(model.dim(), model.dim());
    return f;
  }
  if (model.precision_side()) {
    f.xi = build_xi(model).matrix();
    f.phi = inverse_spd(f.xi, "Phi");
    f.log_det_phi = -log_det_spd(f.xi);
  } else {
    f.phi = build_phi(model).matrix();
    f.xi = inverse_spd(f.phi, "Xi");
    f.log_det_phi = log_det_spd(f.phi);
  }
  return f;
}

// ---------------------------------------------------------------- MGP

VectorXd mgp_precisions(const MgpState& state) {
  VectorXd tau(state.rho.size());
  double acc = 1.0;
  for (Index h = 0; h < state.rho.size(); ++h) {
    if (!(state.rho(h) > 0.0) || !std::isfinite(state.rho(h)))
      throw InternalError("MGP state corrupted: rho[" + std::to_string(h) +
                          "] = " + std::to_string(state.rho(h)));
    acc *= state.rho(h);
    tau(h) = acc;
  }
  return tau;
}

VectorXd mgp_psi(const MgpState& state) { return mgp_precisions(state).cwiseInverse(); }

MgpState mgp_sample_prior(double a1, double a2, int truncation, int p, Rng& rng) {
  if (!(a1 > 0.0) || !(a2 > 0.0)) throw DomainError("MGP shapes must be positive");
  if (truncation < 1 || truncation > max_truncation(p))
    throw ArgumentError("MGP truncation " + std::to_string(truncation) + " outside [1, " +
                        std::to_string(max_truncation(p)) + "]");
  MgpState s;
  s.a1 = a1;
  s.a2 = a2;
  s.rho.resize(truncation);
  for (int h = 0; h < truncation; ++h) s.rho(h) = rng.gamma(h == 0 ? a1 : a2, 1.0);
  return s;
}

}  // namespace sfm
