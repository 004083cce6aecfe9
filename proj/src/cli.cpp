#include "sfm/cli.hpp"

#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "sfm/chain.hpp"
#include "sfm/errors.hpp"
#include "sfm/model_post.hpp"

namespace sfm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json finite_or_string(double v) {
  if (std::isfinite(v)) return v;
  return v < 0 ? "-inf" : (v > 0 ? "inf" : "nan");
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ArgumentError(path.string() + ": " + e.what());
  }
}

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute() || base.empty()) return p;
  return (fs::path(base) / p).lexically_normal().string();
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& section) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ArgumentError("unknown key '" + it.key() + "' in config section '" + section + "'");
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ArgumentError(std::string("config key '") + key + "' has the wrong type");
  }
}

void parse_model(const json& j, RunConfig& c) {
  reject_unknown(j, {"kind", "order", "prior", "mean", "a1", "a2", "sigma_shape", "sigma_rate", "s_beta2", "s_kappa2",
                     "varsigma_rate", "phi", "p", "n", "c", "q"},
                 "model");
  FactorModelSpec& s = c.spec;
  if (j.contains("kind")) s.kind = model_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("prior")) s.prior = prior_kind_from_string(j.at("prior").get<std::string>());
  if (j.contains("mean")) s.mean = mean_kind_from_string(j.at("mean").get<std::string>());
  read_key(j, "order", s.order);
  read_key(j, "a1", s.a1);
  read_key(j, "a2", s.a2);
  read_key(j, "sigma_shape", s.sigma_shape);
  read_key(j, "sigma_rate", s.sigma_rate);
  read_key(j, "s_beta2", s.s_beta2);
  read_key(j, "s_kappa2", s.s_kappa2);
  read_key(j, "varsigma_rate", s.varsigma_rate);
  read_key(j, "p", s.p);
  read_key(j, "n", s.n);
  read_key(j, "c", s.c);
  read_key(j, "q", s.q);
  if (j.contains("phi")) c.phi = j.at("phi");
}

void parse_sampler(const json& j, SamplerConfig& s) {
  reject_unknown(j, {"iterations", "burn_in", "thin", "seed", "initial_h", "adapt", "alpha0", "alpha1", "adapt_start",
                     "criterion", "epsilon", "t", "mala_step", "mala_block", "theta_scales", "varsigma_scale",
                     "adapt_scales", "store_factors", "checkpoint_every"},
                 "sampler");
  read_key(j, "iterations", s.iterations);
  read_key(j, "burn_in", s.burn_in);
  read_key(j, "thin", s.thin);
  read_key(j, "seed", s.seed);
  read_key(j, "initial_h", s.initial_h);
  read_key(j, "adapt", s.adapt);
  read_key(j, "alpha0", s.alpha0);
  read_key(j, "alpha1", s.alpha1);
  read_key(j, "adapt_start", s.adapt_start);
  if (j.contains("criterion")) s.criterion = criterion_from_string(j.at("criterion").get<std::string>());
  read_key(j, "epsilon", s.epsilon);
  read_key(j, "t", s.t);
  read_key(j, "mala_step", s.mala_step);
  read_key(j, "mala_block", s.mala_block);
  if (j.contains("theta_scales")) {
    const auto v = j.at("theta_scales").get<std::vector<double>>();
    s.theta_scales = Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
  }
  read_key(j, "varsigma_scale", s.varsigma_scale);
  read_key(j, "adapt_scales", s.adapt_scales);
  read_key(j, "store_factors", s.store_factors);
  read_key(j, "checkpoint_every", s.checkpoint_every);
}

VectorXd theta_from(const json& phi, Index count, double fallback) {
  if (!phi.contains("theta")) return VectorXd::Constant(count, fallback);
  const json& t = phi.at("theta");
  std::vector<double> v = t.is_array() ? t.get<std::vector<double>>() : std::vector<double>{t.get<double>()};
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

PhiModel resolve_phi(const json& phi, Index p, const std::vector<std::string>& labels) {
  if (phi.is_null()) return PhiModel::identity(p);
  reject_unknown(phi, {"family", "theta", "block_sizes", "coordinates", "metrics", "length_scales", "standardize"},
                 "model.phi");
  const PhiFamily family = phi_family_from_string(phi.value("family", std::string("identity")));
  switch (family) {
    case PhiFamily::Identity: return PhiModel::identity(p);
    case PhiFamily::Exchangeable: return PhiModel::exchangeable(p, theta_from(phi, 1, 0.1)(0));
    case PhiFamily::ARPrecision: return PhiModel::ar_precision(p, theta_from(phi, 1, 0.1)(0));
    case PhiFamily::CircularARPrecision: return PhiModel::circular_ar_precision(p, theta_from(phi, 1, 0.1)(0));
    case PhiFamily::BlockExchangeable: {
      const auto blocks = phi.at("block_sizes").get<std::vector<Index>>();
      Index total = 0;
      for (Index b : blocks) total += b;
      if (total != p) throw DataError("block sizes sum to " + std::to_string(total) + " but the data have p = " + std::to_string(p));
      return PhiModel::block_exchangeable(blocks, theta_from(phi, static_cast<Index>(blocks.size()), 0.1));
    }
    case PhiFamily::DistanceExponential: {
      DistanceSpec ds;
      ds.labels = labels;
      ds.coordinates = MatrixXd::Zero(p, 0);
      if (phi.contains("coordinates")) {
        const std::string path = phi.at("coordinates").get<std::string>();
        ds.coordinates = read_csv(path).values;
        if (ds.coordinates.rows() != p)
          throw DataError(path + " has " + std::to_string(ds.coordinates.rows()) + " rows but the observations have p = " +
                          std::to_string(p) + " columns");
      }
      if (phi.contains("metrics"))
        for (const auto& m : phi.at("metrics")) ds.metrics.push_back(read_distance_csv(m.get<std::string>(), labels));
      std::vector<Index> cols;
      if (phi.contains("standardize")) cols = phi.at("standardize").get<std::vector<Index>>();
      standardize_distance_spec(ds, cols);
      ds.validate();
      VectorXd ls = VectorXd::Ones(ds.num_length_scales());
      if (phi.contains("length_scales")) {
        const auto v = phi.at("length_scales").get<std::vector<double>>();
        ls = Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
      }
      return PhiModel::distance_exponential(std::move(ds), ls);
    }
  }
  throw InternalError("unhandled Phi family");
}

std::string chain_dir_name(int i) { return "chain_" + std::to_string(i); }

std::string spec_digest(const FactorModelSpec& spec) { return digest_hex(fnv1a64(spec.canonical().dump())); }

// Loads the fit manifest and refuses to continue if the model differs.
json verified_fit_manifest(const RunConfig& cfg, const FactorModelSpec& spec) {
  const fs::path path = fs::path(cfg.output) / "manifest.json";
  if (!fs::exists(path)) throw ArgumentError("no fit found: " + path.string() + " does not exist");
  json manifest = read_json_file(path);
  const std::string expected = manifest.at("spec_digest").get<std::string>();
  const std::string actual = spec_digest(spec);
  if (expected != actual) {
    const json diff = json::diff(manifest.at("spec"), spec.canonical());
    throw ArgumentError("model spec digest " + actual + " does not match the fit (" + expected + "); differences: " +
                        diff.dump());
  }
  return manifest;
}

DrawStore merge_stores(const std::vector<DrawStore>& stores) {
  DrawStore out;
  out.manifest = stores.front().manifest;
  for (const DrawStore& s : stores)
    for (Index d = 0; d < s.draws(); ++d) {
      for (const auto& [name, series] : s.params) out.append(name, series.layout, series.rows[static_cast<std::size_t>(d)]);
      out.next_draw(s.h[static_cast<std::size_t>(d)]);
    }
  return out;
}

std::vector<DrawStore> completed_chains(const RunConfig& cfg, const json& manifest) {
  std::vector<DrawStore> stores;
  for (const json& c : manifest.at("chains"))
    if (c.at("status") == "complete") stores.push_back(DrawStore::read((fs::path(cfg.output) / c.at("dir").get<std::string>()).string()));
  if (stores.empty()) throw ArgumentError("the fit in " + cfg.output + " has no completed chains");
  return stores;
}

json k_summary_json(const KSummary& s) {
  return json{{"mode", s.mode}, {"median", s.median}, {"lower", s.lower}, {"upper", s.upper}, {"draws", s.values.size()}};
}

std::vector<std::string> numbered(const std::string& prefix, Index count) {
  std::vector<std::string> out;
  for (Index i = 0; i < count; ++i) out.push_back(prefix + std::to_string(i + 1));
  return out;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + " is empty");
  t.header = split_line(line);
  std::vector<double> values;
  Index rows = 0;
  Index lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != t.header.size())
      throw DataError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                      " fields, found " + std::to_string(cells.size()));
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string& cell = cells[c];
      if (cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan")
        throw DataError(path + ":" + std::to_string(lineno) + ": missing value in column '" + t.header[c] +
                        "' (missing data are not supported)");
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(cell.c_str(), &end);
      if (end != cell.c_str() + cell.size() || errno == ERANGE)
        throw DataError(path + ":" + std::to_string(lineno) + ": cannot parse '" + cell + "' as a number");
      values.push_back(v);
    }
    ++rows;
  }
  const auto cols = static_cast<Index>(t.header.size());
  t.values.resize(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) t.values(i, j) = values[static_cast<std::size_t>(i * cols + j)];
  return t;
}

void write_csv(const std::string& path, const std::vector<std::string>& header, const MatrixXd& values) {
  if (static_cast<Index>(header.size()) != values.cols()) throw InternalError("CSV header does not match the columns");
  std::ostringstream out;
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (Index r = 0; r < values.rows(); ++r) {
    for (Index c = 0; c < values.cols(); ++c) out << (c ? "," : "") << format_double(values(r, c));
    out << '\n';
  }
  write_text(path, out.str());
}

MatrixXd read_distance_csv(const std::string& path, const std::vector<std::string>& labels) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + " is empty");
  std::vector<std::string> header = split_line(line);
  const bool row_labels = !header.empty() && header.front().empty();
  if (row_labels) header.erase(header.begin());
  if (header != labels) {
    std::size_t i = 0;
    while (i < header.size() && i < labels.size() && header[i] == labels[i]) ++i;
    throw DataError(path + ": column labels do not match the observation labels (first difference at position " +
                    std::to_string(i + 1) + ")");
  }
  const auto p = static_cast<Index>(labels.size());
  MatrixXd d(p, p);
  Index r = 0;
  Index lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (row_labels) {
      if (r >= p || cells.empty() || cells.front() != labels[static_cast<std::size_t>(r)])
        throw DataError(path + ":" + std::to_string(lineno) + ": row label does not match the observation labels");
      cells.erase(cells.begin());
    }
    if (r >= p || static_cast<Index>(cells.size()) != p)
      throw DataError(path + ":" + std::to_string(lineno) + ": distance matrix must be " + std::to_string(p) + "x" +
                      std::to_string(p));
    for (Index c = 0; c < p; ++c) {
      char* end = nullptr;
      const std::string& cell = cells[static_cast<std::size_t>(c)];
      d(r, c) = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size())
        throw DataError(path + ":" + std::to_string(lineno) + ": cannot parse '" + cell + "' as a number");
    }
    ++r;
  }
  if (r != p) throw DataError(path + ": expected " + std::to_string(p) + " rows, found " + std::to_string(r));
  return d;
}

RunConfig config_from_json(const json& j, const std::string& base_dir) {
  reject_unknown(j, {"model", "data", "sampler", "run", "simulate", "forecast", "cv", "score"}, "top level");
  RunConfig c;
  if (j.contains("model")) parse_model(j.at("model"), c);
  if (j.contains("sampler")) parse_sampler(j.at("sampler"), c.sampler);
  if (j.contains("data")) {
    const json& d = j.at("data");
    reject_unknown(d, {"y", "w", "x"}, "data");
    c.y_path = resolve(base_dir, d.value("y", std::string()));
    c.w_path = resolve(base_dir, d.value("w", std::string()));
    c.x_path = resolve(base_dir, d.value("x", std::string()));
  }
  if (j.contains("run")) {
    const json& r = j.at("run");
    reject_unknown(r, {"chains", "threads", "output", "seed"}, "run");
    read_key(r, "chains", c.chains);
    read_key(r, "threads", c.threads);
    read_key(r, "seed", c.sampler.seed);
    if (r.contains("output")) c.output = resolve(base_dir, r.at("output").get<std::string>());
  }
  if (j.contains("simulate")) {
    reject_unknown(j.at("simulate"), {"k"}, "simulate");
    read_key(j.at("simulate"), "k", c.simulate_k);
  }
  if (j.contains("forecast")) {
    const json& f = j.at("forecast");
    reject_unknown(f, {"horizon", "origins", "observed_periods"}, "forecast");
    read_key(f, "horizon", c.horizon);
    read_key(f, "origins", c.origins);
    read_key(f, "observed_periods", c.observed_periods);
  }
  if (j.contains("cv")) {
    reject_unknown(j.at("cv"), {"folds", "fold"}, "cv");
    read_key(j.at("cv"), "folds", c.folds);
    read_key(j.at("cv"), "fold", c.fold);
  }
  if (j.contains("score")) {
    const json& s = j.at("score");
    reject_unknown(s, {"predictions", "outcomes"}, "score");
    c.predictions_path = resolve(base_dir, s.value("predictions", std::string()));
    c.outcomes_path = resolve(base_dir, s.value("outcomes", std::string()));
  }
  if (c.phi.is_object()) {
    if (c.phi.contains("coordinates")) c.phi["coordinates"] = resolve(base_dir, c.phi["coordinates"].get<std::string>());
    if (c.phi.contains("metrics"))
      for (auto& m : c.phi["metrics"]) m = resolve(base_dir, m.get<std::string>());
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  return config_from_json(read_json_file(path), fs::path(path).parent_path().string());
}

Dataset load_dataset(RunConfig& cfg, Dataset* held_out) {
  if (cfg.y_path.empty()) throw ArgumentError("the config names no observation file (data.y)");
  const CsvTable y = read_csv(cfg.y_path);
  Dataset full;
  full.y = y.values;
  full.labels = y.header;
  const Index n = full.y.rows(), p = full.y.cols();
  FactorModelSpec& spec = cfg.spec;
  if (spec.p > 0 && spec.p != p)
    throw DataError(cfg.y_path + " has " + std::to_string(p) + " columns but the config sets p = " + std::to_string(spec.p));
  if (!cfg.w_path.empty()) {
    full.w = read_csv(cfg.w_path).values;
    if (full.w.rows() != n)
      throw DataError(cfg.y_path + " has " + std::to_string(n) + " rows but " + cfg.w_path + " has " +
                      std::to_string(full.w.rows()));
  } else {
    full.w = intercept_covariates(n);
  }
  if (!cfg.x_path.empty()) {
    full.x = read_csv(cfg.x_path).values;
    if (full.x.rows() != p)
      throw DataError(cfg.y_path + " has " + std::to_string(p) + " variables but " + cfg.x_path + " has " +
                      std::to_string(full.x.rows()) + " rows");
  }
  spec.p = p;
  spec.c = full.w.cols();
  spec.q = full.x.cols();
  spec.phi = resolve_phi(cfg.phi, p, full.labels);

  Dataset train = full;
  if (cfg.folds > 0) {
    if (cfg.fold < 0 || cfg.fold >= cfg.folds) throw ArgumentError("fold index outside 0..folds-1");
    const std::vector<int> folds = kfold_split(n, cfg.folds, cfg.sampler.seed);
    std::vector<Index> keep, drop;
    for (Index i = 0; i < n; ++i) (folds[static_cast<std::size_t>(i)] == cfg.fold ? drop : keep).push_back(i);
    train.y = full.y(keep, Eigen::all);
    train.w = full.w(keep, Eigen::all);
    if (held_out) {
      *held_out = full;
      held_out->y = full.y(drop, Eigen::all);
      held_out->w = full.w(drop, Eigen::all);
    }
  } else if (held_out) {
    *held_out = Dataset{};
  }
  spec.n = train.n();
  spec.validate();
  train.validate(spec);
  return train;
}

int cmd_simulate(const RunConfig& config) {
  FactorModelSpec spec = config.spec;
  if (spec.p < 1 || spec.n < 1) throw ArgumentError("simulate needs model.p and model.n");
  std::vector<std::string> labels = numbered("y", spec.p);
  spec.phi = resolve_phi(config.phi, spec.p, labels);
  if (spec.mean == MeanKind::Hierarchical && spec.q < 1) throw ArgumentError("simulate: hierarchical mean needs model.q");
  spec.validate();
  Rng rng(config.sampler.seed, 0x73696d);
  TruthParams truth = draw_truth(spec, config.simulate_k, rng);
  const SimulatedData sim = simulate_data(spec, truth, MatrixXd(), MatrixXd(), rng);
  const fs::path out(config.output);
  fs::create_directories(out);
  write_csv((out / "y.csv").string(), labels, sim.data.y);
  write_csv((out / "w.csv").string(), numbered("w", spec.c), sim.data.w);
  if (sim.data.x.size() > 0) write_csv((out / "x.csv").string(), numbered("x", spec.q), sim.data.x);
  json truth_json = sim.truth.to_json();
  truth_json["k"] = config.simulate_k;
  truth_json["seed"] = config.sampler.seed;
  truth_json["spec"] = spec.canonical();
  write_text(out / "truth.json", truth_json.dump(2) + "\n");
  std::cout << json{{"command", "simulate"}, {"output", out.string()}, {"n", spec.n}, {"p", spec.p}}.dump() << "\n";
  return kExitOk;
}

int cmd_fit(RunConfig config) {
  Dataset held;
  const Dataset data = load_dataset(config, &held);
  const FactorModelSpec spec = config.spec;
  config.sampler.validate();
  if (config.chains < 1) throw ArgumentError("--chains must be at least 1");
  const fs::path out(config.output);
  fs::create_directories(out);

  const auto chains = static_cast<std::size_t>(config.chains);
  std::vector<json> info(chains);
  std::vector<int> codes(chains, kExitOk);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= chains) return;
      SamplerConfig sc = config.sampler;
      sc.seed = config.sampler.seed + i;
      sc.chain_id = static_cast<int>(i);
      const std::string dir = chain_dir_name(static_cast<int>(i));
      json entry{{"dir", dir}, {"seed", sc.seed}, {"chain_id", sc.chain_id}};
      try {
        const DrawStore store = run_chain(spec, data, sc, ChainIo{(out / dir).string(), config.resume});
        entry["status"] = store.manifest.at("status");
        entry["draws"] = store.draws();
      } catch (const Error& e) {
        entry["status"] = "failed";
        entry["error"] = e.what();
        codes[i] = dynamic_cast<const NumericalError*>(&e) ? kExitNumerical : kExitValidation;
      }
      info[i] = entry;
    }
  };
  const int threads = std::max(1, std::min(config.threads, config.chains));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  json manifest{{"format", "sfm-fit-1"},
                {"spec", spec.canonical()},
                {"spec_digest", spec_digest(spec)},
                {"sampler", config.sampler.canonical()},
                {"seed", config.sampler.seed},
                {"chains", info}};
  if (config.folds > 0) manifest["holdout"] = {{"folds", config.folds}, {"fold", config.fold}, {"rows", held.n()}};
  write_text(out / "manifest.json", manifest.dump(2) + "\n");

  std::size_t failed = 0;
  int first_code = kExitOk;
  for (std::size_t i = 0; i < chains; ++i)
    if (codes[i] != kExitOk) {
      ++failed;
      if (first_code == kExitOk) first_code = codes[i];
      std::cerr << "chain " << i << " failed: " << info[i].at("error").get<std::string>() << "\n";
    }
  std::cout << json{{"command", "fit"}, {"output", out.string()}, {"chains", chains}, {"failed", failed}}.dump() << "\n";
  if (failed == 0) return kExitOk;
  return failed == chains ? first_code : kExitPartial;
}

int cmd_postprocess(RunConfig config) {
  load_dataset(config);
  const json manifest = verified_fit_manifest(config, config.spec);
  const std::vector<DrawStore> stores = completed_chains(config, manifest);
  const fs::path post = fs::path(config.output) / "post";
  fs::create_directories(post);
  const SamplerConfig& sc = config.sampler;
  json per_chain = json::array();
  std::vector<int> pooled;
  std::size_t deficient = 0;
  for (std::size_t i = 0; i < stores.size(); ++i) {
    const DrawStore identified = identify_store(stores[i]);
    identified.write((post / chain_dir_name(static_cast<int>(i)) / "identified").string());
    deficient += identified.manifest.at("rank_deficient").size();
    const KSummary ks = k_posterior_summary(stores[i], sc.criterion, sc.epsilon, sc.t);
    pooled.insert(pooled.end(), ks.values.begin(), ks.values.end());
    per_chain.push_back(k_summary_json(ks));
  }
  const KSummary all = summarize_k(pooled);
  const DrawStore merged = merge_stores(stores);
  write_csv((post / "omega_mean.csv").string(), numbered("v", config.spec.p), posterior_mean_omega(merged));
  json report{{"command", "postprocess"},
              {"criterion", to_string(sc.criterion)},
              {"epsilon", sc.epsilon},
              {"t", sc.t},
              {"k_star", k_summary_json(all)},
              {"chains", per_chain},
              {"rank_deficient_draws", deficient}};
  write_text(post / "k_summary.json", report.dump(2) + "\n");
  std::cout << report.dump() << "\n";
  return kExitOk;
}

int cmd_forecast(RunConfig config) {
  const Dataset data = load_dataset(config);
  if (!config.spec.dynamic()) throw ArgumentError("forecast needs a dynamic model");
  const json manifest = verified_fit_manifest(config, config.spec);
  const DrawStore merged = merge_stores(completed_chains(config, manifest));
  const Index periods = config.observed_periods < 0 ? data.n() : config.observed_periods;
  if (periods > data.n()) throw ArgumentError("observed_periods exceeds the rows of " + config.y_path);
  const MatrixXd y = data.y.topRows(periods);
  std::vector<Index> origins = config.origins;
  if (origins.empty()) origins.push_back(periods * data.p());
  // Without a covariate file the mean is an intercept, known for any period.
  MatrixXd w = data.w;
  if (config.w_path.empty()) {
    Index last = 0;
    for (Index o : origins) last = std::max(last, o + config.horizon);
    w = intercept_covariates(std::max(data.n(), (last + data.p() - 1) / data.p()));
  }
  Rng rng(config.sampler.seed, 0x666f7265);
  const auto results = forecast_h(merged, y, w, origins, config.horizon, rng);
  MatrixXd table(static_cast<Index>(results.size()) * config.horizon, 5);
  Index row = 0;
  for (const ForecastResult& r : results)
    for (Index j = 0; j < config.horizon; ++j, ++row)
      table.row(row) << static_cast<double>(r.origin), static_cast<double>(j + 1), r.mean(j), r.lower(j), r.upper(j);
  const fs::path path = fs::path(config.output) / "forecast.csv";
  write_csv(path.string(), {"origin", "hour", "mean", "lower", "upper"}, table);
  std::cout << json{{"command", "forecast"}, {"output", path.string()}, {"rows", table.rows()}}.dump() << "\n";
  return kExitOk;
}

int cmd_score(RunConfig config) {
  json report{{"command", "score"}};
  if (!config.predictions_path.empty() || !config.outcomes_path.empty()) {
    if (config.predictions_path.empty() || config.outcomes_path.empty())
      throw ArgumentError("score needs both score.predictions and score.outcomes");
    const MatrixXd probs = read_csv(config.predictions_path).values;
    const MatrixXd outcomes = read_csv(config.outcomes_path).values;
    if (probs.rows() != outcomes.rows() || probs.cols() != outcomes.cols())
      throw DataError(config.predictions_path + " and " + config.outcomes_path + " differ in shape");
    report["brier"] = brier_score(probs, outcomes);
    report["log_score"] = finite_or_string(log_score(probs, outcomes));
  } else {
    Dataset held;
    const Dataset data = load_dataset(config, &held);
    const json manifest = verified_fit_manifest(config, config.spec);
    const DrawStore merged = merge_stores(completed_chains(config, manifest));
    const CpoResult cpo = cpo_pml(observation_log_likelihoods(config.spec, merged, data));
    report["log_pml"] = finite_or_string(cpo.log_pml);
    report["n_train"] = data.n();
    write_csv((fs::path(config.output) / "cpo.csv").string(), {"log_cpo"}, cpo.log_cpo);
    if (config.spec.probit() && held.n() > 0) {
      const MatrixXd probs = predictive_probabilities(merged, held.w);
      report["n_test"] = held.n();
      report["brier"] = brier_score(probs, held.y);
      report["log_score"] = finite_or_string(log_score(probs, held.y));
    }
  }
  if (!config.output.empty()) write_text(fs::path(config.output) / "score.json", report.dump(2) + "\n");
  std::cout << report.dump() << "\n";
  return kExitOk;
}

int run_command(const std::string& command, RunConfig config) {
  try {
    if (command == "simulate") return cmd_simulate(config);
    if (command == "fit") return cmd_fit(std::move(config));
    if (command == "postprocess") return cmd_postprocess(std::move(config));
    if (command == "forecast") return cmd_forecast(std::move(config));
    if (command == "score") return cmd_score(std::move(config));
    throw ArgumentError("unknown command '" + command + "'");
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace sfm
