#include "sfm/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "sfm/errors.hpp"
#include "sfm/matrix_variate.hpp"

namespace sfm {

using nlohmann::json;

namespace {

template <class E>
E parse_enum(const std::string& s, std::initializer_list<std::pair<const char*, E>> table,
             const char* what) {
  for (const auto& [name, value] : table)
    if (s == name) return value;
  std::string allowed;
  for (const auto& [name, value] : table) allowed += std::string(allowed.empty() ? "" : ", ") + name;
  throw ArgumentError(std::string("unknown ") + what + " '" + s + "' (expected one of " + allowed + ")");
}

json matrix_json(const MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

MatrixXd matrix_from_json(const json& j) {
  MatrixXd m(j.at("rows").get<Index>(), j.at("cols").get<Index>());
  const json& data = j.at("data");
  for (Index i = 0; i < m.rows(); ++i)
    for (Index k = 0; k < m.cols(); ++k) m(i, k) = data.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(k)).get<double>();
  return m;
}

json vector_json(const VectorXd& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

VectorXd vector_from_json(const json& j) {
  VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

std::uint64_t matrix_digest(const MatrixXd& m) {
  std::string bytes(reinterpret_cast<const char*>(m.data()), sizeof(double) * static_cast<std::size_t>(m.size()));
  return fnv1a64(bytes);
}

}  // namespace

const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Static: return "static";
    case ModelKind::Dynamic: return "dynamic";
    case ModelKind::Probit: return "probit";
  }
  return "?";
}
const char* to_string(PriorKind k) { return k == PriorKind::MatrixNormal ? "matrix_normal" : "matrix_t"; }
const char* to_string(MeanKind k) {
  switch (k) {
    case MeanKind::Constant: return "constant";
    case MeanKind::Regression: return "regression";
    case MeanKind::Hierarchical: return "hierarchical";
  }
  return "?";
}
const char* to_string(Criterion c) { return c == Criterion::Epsilon ? "epsilon" : "proportion"; }

ModelKind model_kind_from_string(const std::string& s) {
  return parse_enum<ModelKind>(
      s, {{"static", ModelKind::Static}, {"dynamic", ModelKind::Dynamic}, {"probit", ModelKind::Probit}},
      "model kind");
}
PriorKind prior_kind_from_string(const std::string& s) {
  return parse_enum<PriorKind>(s, {{"matrix_normal", PriorKind::MatrixNormal}, {"matrix_t", PriorKind::MatrixT}},
                               "prior");
}
MeanKind mean_kind_from_string(const std::string& s) {
  return parse_enum<MeanKind>(s,
                              {{"constant", MeanKind::Constant},
                               {"regression", MeanKind::Regression},
                               {"hierarchical", MeanKind::Hierarchical}},
                              "mean model");
}
Criterion criterion_from_string(const std::string& s) {
  return parse_enum<Criterion>(s, {{"epsilon", Criterion::Epsilon}, {"proportion", Criterion::Proportion}},
                               "criterion");
}

void FactorModelSpec::validate() const {
  if (p < 1) throw ArgumentError("model needs p >= 1 variables");
  if (n < 0) throw ArgumentError("negative number of observations");
  if (c < 1) throw ArgumentError("mean model needs at least one covariate column");
  if (mean == MeanKind::Constant && c != 1) throw ArgumentError("constant mean uses exactly one covariate column");
  if (mean == MeanKind::Hierarchical && q < 1) throw ArgumentError("hierarchical mean needs meta-covariates (q >= 1)");
  if (dynamic() && order < 1) throw ArgumentError("dynamic model needs VAR order >= 1");
  if (phi.dim() != p)
    throw ArgumentError("Phi model has dimension " + std::to_string(phi.dim()) + " but p = " + std::to_string(p));
  if (!(a1 > 0 && a2 > 0)) throw DomainError("MGP shapes must be positive");
  if (!(sigma_shape > 0 && sigma_rate > 0)) throw DomainError("idiosyncratic variance prior must be proper");
  if (!(s_beta2 > 0 && s_kappa2 > 0)) throw DomainError("mean prior variances must be positive");
  if (!(varsigma_rate > 0)) throw DomainError("varsigma prior rate must be positive");
}

json FactorModelSpec::canonical() const {
  json phi_json{{"family", to_string(phi.family())}, {"theta", vector_json(phi.theta())}};
  if (phi.family() == PhiFamily::BlockExchangeable) phi_json["block_sizes"] = phi.block_sizes();
  if (phi.family() == PhiFamily::DistanceExponential) {
    json metrics = json::array();
    for (const MatrixXd& m : phi.distance().metrics) metrics.push_back(digest_hex(matrix_digest(m)));
    phi_json["coordinates"] = digest_hex(matrix_digest(phi.distance().coordinates));
    phi_json["metrics"] = metrics;
  }
  return json{{"kind", to_string(kind)},
              {"order", order},
              {"p", p},
              {"n", n},
              {"c", c},
              {"q", q},
              {"prior", to_string(prior)},
              {"phi", phi_json},
              {"a1", a1},
              {"a2", a2},
              {"sigma_shape", sigma_shape},
              {"sigma_rate", sigma_rate},
              {"mean", to_string(mean)},
              {"s_beta2", s_beta2},
              {"s_kappa2", s_kappa2},
              {"varsigma_rate", varsigma_rate}};
}

void Dataset::validate(const FactorModelSpec& spec) const {
  if (y.cols() != spec.p) throw DataError("observations have " + std::to_string(y.cols()) + " columns, model expects p = " + std::to_string(spec.p));
  if (!y.allFinite()) throw DataError("observations contain missing or non-finite values");
  if (w.rows() != y.rows() || w.cols() != spec.c)
    throw DataError("covariates are " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                    ", expected " + std::to_string(y.rows()) + "x" + std::to_string(spec.c));
  if (!w.allFinite()) throw DataError("covariates contain non-finite values");
  if (spec.mean == MeanKind::Hierarchical && (x.rows() != spec.p || x.cols() != spec.q))
    throw DataError("meta-covariates are " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                    ", expected " + std::to_string(spec.p) + "x" + std::to_string(spec.q));
  if (spec.probit()) {
    for (Index i = 0; i < y.rows(); ++i)
      for (Index j = 0; j < y.cols(); ++j)
        if (y(i, j) != 0.0 && y(i, j) != 1.0)
          throw DataError("probit observations must be 0 or 1 (row " + std::to_string(i + 1) + ", column " +
                          std::to_string(j + 1) + ")");
  }
}

MatrixXd intercept_covariates(Index n) { return MatrixXd::Ones(n, 1); }

json ChainState::to_json() const {
  json a_json = json::array();
  for (const MatrixXd& ai : a) a_json.push_back(matrix_json(ai));
  return json{{"lambda", matrix_json(lambda)},
              {"eta", matrix_json(eta)},
              {"sigma2", vector_json(sigma2)},
              {"beta", matrix_json(beta)},
              {"kappa", matrix_json(kappa)},
              {"theta", vector_json(theta)},
              {"mgp", {{"a1", mgp.a1}, {"a2", mgp.a2}, {"rho", vector_json(mgp.rho)}}},
              {"s", matrix_json(s)},
              {"varsigma_check", varsigma_check},
              {"a", a_json},
              {"z", matrix_json(z)}};
}

ChainState ChainState::from_json(const json& j) {
  ChainState s;
  s.lambda = matrix_from_json(j.at("lambda"));
  s.eta = matrix_from_json(j.at("eta"));
  s.sigma2 = vector_from_json(j.at("sigma2"));
  s.beta = matrix_from_json(j.at("beta"));
  s.kappa = matrix_from_json(j.at("kappa"));
  s.theta = vector_from_json(j.at("theta"));
  s.mgp.a1 = j.at("mgp").at("a1").get<double>();
  s.mgp.a2 = j.at("mgp").at("a2").get<double>();
  s.mgp.rho = vector_from_json(j.at("mgp").at("rho"));
  s.s = matrix_from_json(j.at("s"));
  s.varsigma_check = j.at("varsigma_check").get<double>();
  for (const json& ai : j.at("a")) s.a.push_back(matrix_from_json(ai));
  s.z = matrix_from_json(j.at("z"));
  return s;
}

void SamplerConfig::validate() const {
  if (iterations < 0 || burn_in < 0) throw ArgumentError("iteration counts must be non-negative");
  if (thin < 1) throw ArgumentError("thinning must be >= 1");
  if (!(alpha0 <= 0.0)) throw ArgumentError("adaptation requires alpha0 <= 0");
  if (!(alpha1 < 0.0)) throw ArgumentError("adaptation requires alpha1 < 0");
  if (!(t > 0.0 && t < 1.0)) throw ArgumentError("proportion threshold T must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw ArgumentError("epsilon must be positive");
  if (mala_block < 1) throw ArgumentError("MALA block length must be >= 1");
  if (!(mala_step > 0.0)) throw ArgumentError("MALA step size must be positive");
  if (initial_h < 0) throw ArgumentError("initial truncation must be non-negative");
}

json SamplerConfig::canonical() const {
  return json{{"iterations", iterations},
              {"burn_in", burn_in},
              {"thin", thin},
              {"initial_h", initial_h},
              {"adapt", adapt},
              {"alpha0", alpha0},
              {"alpha1", alpha1},
              {"adapt_start", adapt_start},
              {"criterion", to_string(criterion)},
              {"epsilon", epsilon},
              {"t", t},
              {"mala_step", mala_step},
              {"mala_block", mala_block},
              {"theta_scales", vector_json(theta_scales)},
              {"varsigma_scale", varsigma_scale},
              {"adapt_scales", adapt_scales},
              {"store_factors", store_factors}};
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::string digest_hex(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

}  // namespace sfm
