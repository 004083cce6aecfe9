#include <algorithm>
#include <cmath>

#include "sfm/errors.hpp"
#include "sfm/inference.hpp"
#include "sfm/matrix_variate.hpp"

namespace sfm {

namespace {

constexpr double kThetaTarget = 0.30;
constexpr double kMalaTarget = 0.574;

/// Robbins-Monro step on a log scale parameter.
double rm_update(double scale, double accept_rate, double target, long iteration) {
  const double gain = 1.0 / std::pow(static_cast<double>(iteration) + 1.0, 0.6);
  return scale * std::exp(gain * (accept_rate - target));
}

}  // namespace

nlohmann::json Tuning::to_json() const {
  std::vector<double> ts(theta_scales.data(), theta_scales.data() + theta_scales.size());
  return {{"theta_scales", ts},
          {"varsigma_scale", varsigma_scale},
          {"mala_step", mala_step},
          {"mala_block", mala_block},
          {"theta_accepts", theta_accepts},
          {"theta_tries", theta_tries},
          {"varsigma_accepts", varsigma_accepts},
          {"varsigma_tries", varsigma_tries},
          {"mala", {mala.proposed, mala.accepted, mala.nonfinite}}};
}

Tuning Tuning::from_json(const nlohmann::json& j) {
  Tuning t;
  const auto ts = j.at("theta_scales").get<std::vector<double>>();
  t.theta_scales = Eigen::Map<const VectorXd>(ts.data(), static_cast<Index>(ts.size()));
  t.varsigma_scale = j.at("varsigma_scale").get<double>();
  t.mala_step = j.at("mala_step").get<double>();
  t.mala_block = j.at("mala_block").get<int>();
  t.theta_accepts = j.at("theta_accepts").get<long>();
  t.theta_tries = j.at("theta_tries").get<long>();
  t.varsigma_accepts = j.at("varsigma_accepts").get<long>();
  t.varsigma_tries = j.at("varsigma_tries").get<long>();
  t.mala.proposed = j.at("mala")[0].get<long>();
  t.mala.accepted = j.at("mala")[1].get<long>();
  t.mala.nonfinite = j.at("mala")[2].get<long>();
  return t;
}

Tuning initial_tuning(const FactorModelSpec& spec, const SamplerConfig& config) {
  Tuning t;
  const Index np = spec.phi.num_params();
  if (config.theta_scales.size() == np) t.theta_scales = config.theta_scales;
  else if (config.theta_scales.size() == 0) t.theta_scales = VectorXd::Constant(np, 0.5);
  else throw ArgumentError("theta_scales has " + std::to_string(config.theta_scales.size()) + " entries, Phi family has " + std::to_string(np));
  t.varsigma_scale = config.varsigma_scale;
  t.mala_step = config.mala_step;
  t.mala_block = config.mala_block;
  return t;
}

ChainState initial_state(const FactorModelSpec& spec, const Dataset& data, int h, Rng& rng) {
  spec.validate();
  const Index p = spec.p;
  const Index n = data.n();
  if (h < 1 || h > max_truncation(static_cast<int>(p)))
    throw ArgumentError("initial truncation " + std::to_string(h) + " outside [1, " +
                        std::to_string(max_truncation(static_cast<int>(p))) + "]");
  ChainState s;
  s.theta = spec.phi.theta();
  s.mgp.a1 = spec.a1;
  s.mgp.a2 = spec.a2;
  s.mgp.rho = VectorXd::Ones(h);
  s.varsigma_check = 1.0;
  s.kappa = MatrixXd::Zero(spec.q, spec.c);
  s.sigma2 = VectorXd::Ones(p);
  if (spec.probit()) {
    s.z.resize(n, p);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < p; ++j) s.z(i, j) = data.y(i, j) > 0.5 ? 0.5 : -0.5;
  }
  const MatrixXd& resp = spec.probit() ? s.z : data.y;
  // Least-squares start for the mean coefficients when identifiable.
  s.beta = MatrixXd::Zero(p, spec.c);
  if (n > spec.c) {
    MatrixXd wtw = data.w.transpose() * data.w;
    wtw.diagonal().array() += 1e-8;
    s.beta = wtw.ldlt().solve(data.w.transpose() * resp).transpose();
    if (!spec.probit()) {
      const MatrixXd r = resp - data.w * s.beta.transpose();
      for (Index j = 0; j < p; ++j) s.sigma2(j) = std::max(0.5 * r.col(j).squaredNorm() / static_cast<double>(n), 1e-3);
    }
  }
  s.lambda = 0.1 * rng.normal_matrix(p, h);
  const Index rows = spec.dynamic() ? n + spec.order : n;
  s.eta = rng.normal_matrix(rows, h);
  if (spec.matrix_t()) {
    const PhiFactors f = factorize_phi(state_phi(s, spec));
    const double dof = s.dof();
    s.s = (dof + static_cast<double>(p) - 1.0) / (dof - 2.0) * f.xi;  // prior mean of S
  }
  if (spec.dynamic()) s.a.assign(static_cast<std::size_t>(spec.order), MatrixXd::Zero(h, h));
  return s;
}

void gibbs_sweep(ChainState& state, const FactorModelSpec& spec, const Dataset& data, Tuning& tuning,
                 long iteration, bool burn_in, Rng& rng) {
  try {
    if (spec.probit()) update_probit_latents(state, data, rng);
    update_lambda(state, spec, data, rng);
    update_sigma2(state, spec, data, rng);
    update_B_K(state, spec, data, rng);
    if (spec.dynamic()) {
      ffbs_factors(state, spec, data, rng);
      const MalaStats ms = update_A_mala_blocks(state, spec, tuning.mala_step, tuning.mala_block, rng);
      tuning.mala.proposed += ms.proposed;
      tuning.mala.accepted += ms.accepted;
      tuning.mala.nonfinite += ms.nonfinite;
      if (burn_in && ms.proposed > 0)
        tuning.mala_step = rm_update(tuning.mala_step, static_cast<double>(ms.accepted) / static_cast<double>(ms.proposed),
                                     kMalaTarget, iteration);
    } else {
      update_eta_static(state, spec, data, rng);
    }
    update_rho(state, spec, rng);
    if (spec.phi.num_params() > 0) {
      const MhResult r = update_theta_mh(state, spec, tuning.theta_scales, rng);
      ++tuning.theta_tries;
      tuning.theta_accepts += r.accepted ? 1 : 0;
      if (burn_in) tuning.theta_scales *= rm_update(1.0, r.accepted ? 1.0 : 0.0, kThetaTarget, iteration);
    }
    if (spec.matrix_t()) {
      update_s(state, spec, rng);
      const MhResult r = update_S_varsigma_joint(state, spec, tuning.varsigma_scale, rng);
      ++tuning.varsigma_tries;
      tuning.varsigma_accepts += r.accepted ? 1 : 0;
      if (burn_in) tuning.varsigma_scale = rm_update(tuning.varsigma_scale, r.accepted ? 1.0 : 0.0, kThetaTarget, iteration);
    }
  } catch (const NumericalError& e) {
    throw NumericalError(e.message(), iteration, e.block());
  }
}

}  // namespace sfm
