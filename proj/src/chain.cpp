#include "sfm/chain.hpp"

#include <filesystem>
#include <fstream>

#include "sfm/errors.hpp"
#include "sfm/matrix_variate.hpp"

namespace sfm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Progress {
  long iteration = 0;
  std::vector<int> h_trajectory;
  json events = json::array();
};

int default_initial_h(const FactorModelSpec& spec, const SamplerConfig& config) {
  if (config.initial_h > 0) return config.initial_h;
  return std::min(max_truncation(static_cast<int>(spec.p)), 10);
}

void record_draw(DrawStore& store, const ChainState& s, const FactorModelSpec& spec, const SamplerConfig& config) {
  store.append("lambda", Layout::PByH, s.lambda);
  store.append("sigma2", Layout::Fixed, MatrixXd(s.sigma2));
  store.append("beta", Layout::Fixed, s.beta);
  if (spec.mean == MeanKind::Hierarchical) store.append("kappa", Layout::Fixed, s.kappa);
  if (spec.phi.num_params() > 0) store.append("theta", Layout::Fixed, MatrixXd(s.theta));
  store.append("rho", Layout::ByH, MatrixXd(s.mgp.rho));
  if (spec.matrix_t()) store.append("varsigma_check", Layout::Fixed, std::vector<double>{s.varsigma_check});
  if (spec.dynamic()) {
    std::vector<double> flat;
    for (const MatrixXd& a : s.a) flat.insert(flat.end(), a.data(), a.data() + a.size());
    store.append("a", Layout::MByHByH, flat);
  }
  if (config.store_factors) store.append("eta", Layout::RowsByH, s.eta);
  store.next_draw(static_cast<int>(s.h()));
}

json base_manifest(const FactorModelSpec& spec, const Dataset& data, const SamplerConfig& config) {
  const json canon = spec.canonical();
  return json{{"format", "sfm-drawstore-1"},
              {"spec", canon},
              {"spec_digest", digest_hex(fnv1a64(canon.dump()))},
              {"sampler", config.canonical()},
              {"seed", config.seed},
              {"chain_id", config.chain_id},
              {"thin", config.thin},
              {"burn_in", config.burn_in},
              {"iterations", config.iterations},
              {"criterion", {{"kind", to_string(config.criterion)}, {"epsilon", config.epsilon}, {"t", config.t}}},
              {"scale_convention", "Phi in correlation form (unit diagonal, tr = p); Psi free via MGP"},
              {"dims",
               {{"p", spec.p},
                {"n", data.n()},
                {"c", spec.c},
                {"q", spec.q},
                {"m", spec.dynamic() ? spec.order : 0},
                {"factor_rows", spec.dynamic() ? data.n() + spec.order : data.n()}}}};
}

void finish_manifest(DrawStore& store, const Progress& prog, const Tuning& tuning, const std::string& status) {
  store.manifest["h_trajectory"] = prog.h_trajectory;
  store.manifest["truncation_events"] = prog.events;
  store.manifest["completed_iterations"] = prog.iteration;
  store.manifest["status"] = status;
  store.manifest["tuning"] = tuning.to_json();
}

void write_checkpoint(const std::string& dir, const DrawStore& store, const ChainState& state, const Rng& main,
                      const Rng& adapt, const Tuning& tuning, const Progress& prog) {
  const fs::path cp = fs::path(dir) / "checkpoint";
  store.write((cp / "draws").string());
  json j{{"iteration", prog.iteration},
         {"state", state.to_json()},
         {"rng_main", main.serialize()},
         {"rng_adapt", adapt.serialize()},
         {"tuning", tuning.to_json()},
         {"h_trajectory", prog.h_trajectory},
         {"events", prog.events}};
  const fs::path tmp = cp / "state.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << j.dump();
  }
  fs::rename(tmp, cp / "state.json");
}

}  // namespace

DrawStore run_chain(const FactorModelSpec& spec, const Dataset& data, const SamplerConfig& config, const ChainIo& io) {
  spec.validate();
  config.validate();
  data.validate(spec);
  const Rng base(config.seed, static_cast<std::uint64_t>(config.chain_id));
  Rng main = base.split(1);
  Rng adapt = base.split(2);
  Tuning tuning = initial_tuning(spec, config);
  Progress prog;
  DrawStore store;
  ChainState state;

  const fs::path cp_state = fs::path(io.dir) / "checkpoint" / "state.json";
  if (io.resume && !io.dir.empty() && fs::exists(cp_state)) {
    std::ifstream in(cp_state);
    json j;
    in >> j;
    state = ChainState::from_json(j.at("state"));
    main.deserialize(j.at("rng_main").get<std::string>());
    adapt.deserialize(j.at("rng_adapt").get<std::string>());
    tuning = Tuning::from_json(j.at("tuning"));
    prog.iteration = j.at("iteration").get<long>();
    prog.h_trajectory = j.at("h_trajectory").get<std::vector<int>>();
    prog.events = j.at("events");
    store = DrawStore::read((fs::path(io.dir) / "checkpoint" / "draws").string());
  } else {
    state = initial_state(spec, data, default_initial_h(spec, config), main);
  }
  store.manifest = base_manifest(spec, data, config);

  const long total = config.burn_in + config.iterations;
  long it = prog.iteration;
  try {
    while (it < total) {
      ++it;
      const bool burn = it <= config.burn_in;
      gibbs_sweep(state, spec, data, tuning, it, burn, main);
      if (!burn && (it - config.burn_in) % config.thin == 0) record_draw(store, state, spec, config);
      const int kstar = effective_k(state.lambda, state.sigma2, config.criterion, config.epsilon, config.t);
      AdaptEvent ev;
      if (adapt_truncation(state, spec, data, kstar, it, config, adapt, &ev))
        prog.events.push_back({{"iteration", ev.iteration}, {"action", ev.action}, {"from", ev.h_before}, {"to", ev.h_after}});
      prog.h_trajectory.push_back(static_cast<int>(state.h()));
      prog.iteration = it;
      const bool stop = config.stop_after >= 0 && it >= config.stop_after && it < total;
      if (!io.dir.empty() && ((config.checkpoint_every > 0 && it % config.checkpoint_every == 0) || stop))
        write_checkpoint(io.dir, store, state, main, adapt, tuning, prog);
      if (stop) {
        finish_manifest(store, prog, tuning, "stopped");
        return store;
      }
    }
  } catch (const Error& e) {
    finish_manifest(store, prog, tuning, "failed");
    store.manifest["error"] = e.what();
    if (!io.dir.empty()) store.write(io.dir);
    throw;
  }
  finish_manifest(store, prog, tuning, "complete");
  if (!io.dir.empty()) {
    store.write(io.dir);
    fs::remove_all(fs::path(io.dir) / "checkpoint");
  }
  return store;
}

PosteriorDraw decode_draw(const DrawStore& store, Index draw) {
  const json& dims = store.manifest.at("dims");
  const Index p = dims.at("p").get<Index>();
  const Index c = dims.at("c").get<Index>();
  const Index q = dims.at("q").get<Index>();
  const Index m = dims.at("m").get<Index>();
  const Index h = store.h.at(static_cast<std::size_t>(draw));
  PosteriorDraw d;
  d.lambda = store.matrix("lambda", draw, p, h);
  d.sigma2 = store.matrix("sigma2", draw, p, 1);
  d.beta = store.matrix("beta", draw, p, c);
  if (store.has("kappa")) d.kappa = store.matrix("kappa", draw, q, c);
  if (store.has("theta")) {
    const auto& r = store.row("theta", draw);
    d.theta = Eigen::Map<const VectorXd>(r.data(), static_cast<Index>(r.size()));
  }
  d.rho = store.matrix("rho", draw, h, 1);
  if (store.has("varsigma_check")) d.varsigma_check = store.row("varsigma_check", draw).at(0);
  if (store.has("a")) {
    const auto& r = store.row("a", draw);
    for (Index i = 0; i < m; ++i) d.a.push_back(Eigen::Map<const MatrixXd>(r.data() + i * h * h, h, h));
  }
  if (store.has("eta")) d.eta = store.matrix("eta", draw, dims.at("factor_rows").get<Index>(), h);
  return d;
}

}  // namespace sfm
