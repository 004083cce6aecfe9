#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "sfm/cli.hpp"
#include "sfm/draw_store.hpp"
#include "sfm/errors.hpp"

using namespace sfm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sfm_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

// Runs a command with stdout and stderr captured.
int quiet(const std::string& command, const RunConfig& config) {
  std::ostringstream sink;
  std::streambuf* out = std::cout.rdbuf(sink.rdbuf());
  std::streambuf* err = std::cerr.rdbuf(sink.rdbuf());
  const int rc = run_command(command, config);
  std::cout.rdbuf(out);
  std::cerr.rdbuf(err);
  return rc;
}

int simulate(const fs::path& root, const json& model, int k = 2, std::uint64_t seed = 3) {
  const json cfg = {{"model", model}, {"simulate", {{"k", k}}}, {"run", {{"seed", seed}, {"output", "data"}}}};
  return quiet("simulate", config_from_json(cfg, root.string()));
}

json fit_config(const json& model, const json& sampler, const json& run) {
  return {{"model", model}, {"data", {{"y", "data/y.csv"}}}, {"sampler", sampler}, {"run", run}};
}

}  // namespace

TEST_CASE("CSV round trip and parse errors") {
  const fs::path dir = fresh_dir("csv");
  MatrixXd m(2, 3);
  m << 0.1, -2.5e-300, 1.0 / 3.0, 4, 5, 6;
  write_csv((dir / "m.csv").string(), {"a", "b", "c"}, m);
  const CsvTable t = read_csv((dir / "m.csv").string());
  CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
  CHECK(t.values == m);

  write_file(dir / "missing.csv", "a,b\n1,\n");
  CHECK_THROWS_WITH_AS(read_csv((dir / "missing.csv").string()), doctest::Contains("missing value"), DataError);
  write_file(dir / "ragged.csv", "a,b\n1,2,3\n");
  CHECK_THROWS_WITH_AS(read_csv((dir / "ragged.csv").string()), doctest::Contains("expected 2 fields"), DataError);
  write_file(dir / "text.csv", "a\nx1\n");
  CHECK_THROWS_WITH_AS(read_csv((dir / "text.csv").string()), doctest::Contains("cannot parse"), DataError);
}

TEST_CASE("distance matrices must carry the observation labels") {
  const fs::path dir = fresh_dir("dist");
  write_file(dir / "d.csv", ",u,v\nu,0,1.5\nv,1.5,0\n");
  const MatrixXd d = read_distance_csv((dir / "d.csv").string(), {"u", "v"});
  CHECK(d(0, 1) == 1.5);
  CHECK_THROWS_WITH_AS(read_distance_csv((dir / "d.csv").string(), {"u", "w"}), doctest::Contains("position 2"),
                       DataError);
  write_file(dir / "plain.csv", "u,v\n0,2\n2,0\n");
  CHECK(read_distance_csv((dir / "plain.csv").string(), {"u", "v"})(1, 0) == 2.0);
}

TEST_CASE("config validation") {
  const fs::path dir = fresh_dir("config");
  CHECK_THROWS_AS(config_from_json(json{{"sampler", {{"iteration", 10}}}}, dir.string()), Error);
  CHECK_THROWS_AS(config_from_json(json{{"extra", 1}}, dir.string()), Error);

  write_file(dir / "y.csv", "a,b,c\n1,2,3\n4,5,6\n7,8,9\n");
  write_file(dir / "w.csv", "w1\n1\n1\n");
  RunConfig cfg = config_from_json(json{{"data", {{"y", "y.csv"}, {"w", "w.csv"}}}}, dir.string());
  try {
    load_dataset(cfg);
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("y.csv") != std::string::npos);
    CHECK(msg.find("w.csv") != std::string::npos);
  }
  CHECK(quiet("fit", cfg) == kExitValidation);
  CHECK(quiet("fit", config_from_json(json{{"data", {{"y", "absent.csv"}}}}, dir.string())) == kExitValidation);
}

TEST_CASE("simulate writes deterministic data of the requested shape") {
  const fs::path a = fresh_dir("sim_a"), b = fresh_dir("sim_b");
  const json model = {{"p", 6}, {"n", 40}};
  REQUIRE(simulate(a, model) == kExitOk);
  REQUIRE(simulate(b, model) == kExitOk);
  CHECK(tree(a) == tree(b));
  const CsvTable y = read_csv((a / "data" / "y.csv").string());
  CHECK(y.values.rows() == 40);
  CHECK(y.values.cols() == 6);
  const json truth = json::parse(slurp(a / "data" / "truth.json"));
  CHECK(truth.at("k") == 2);

  const fs::path c = fresh_dir("sim_probit");
  REQUIRE(simulate(c, json{{"kind", "probit"}, {"p", 5}, {"n", 30}}) == kExitOk);
  const MatrixXd yp = read_csv((c / "data" / "y.csv").string()).values;
  CHECK((yp.array() == 0.0 || yp.array() == 1.0).all());
}

TEST_CASE("fit, postprocess and score") {
  const fs::path root = fresh_dir("fit");
  const json model = {{"p", 6}, {"n", 60}};
  REQUIRE(simulate(root, model) == kExitOk);
  const json cfg = fit_config(json::object(), {{"burn_in", 100}, {"iterations", 100}},
                              {{"seed", 4}, {"chains", 2}, {"threads", 2}, {"output", "fit"}});
  REQUIRE(quiet("fit", config_from_json(cfg, root.string())) == kExitOk);
  const json manifest = json::parse(slurp(root / "fit" / "manifest.json"));
  REQUIRE(manifest.at("chains").size() == 2);
  for (const json& c : manifest.at("chains")) {
    CHECK(c.at("status") == "complete");
    CHECK(c.at("draws") == 100);
  }
  CHECK(manifest.at("chains")[1].at("seed") == 5);

  REQUIRE(quiet("postprocess", config_from_json(cfg, root.string())) == kExitOk);
  const json ks = json::parse(slurp(root / "fit" / "post" / "k_summary.json"));
  CHECK(ks.at("k_star").at("draws") == 200);
  CHECK(fs::exists(root / "fit" / "post" / "chain_1" / "identified" / "manifest.json"));
  CHECK(read_csv((root / "fit" / "post" / "omega_mean.csv").string()).values.rows() == 6);

  REQUIRE(quiet("score", config_from_json(cfg, root.string())) == kExitOk);
  const json score = json::parse(slurp(root / "fit" / "score.json"));
  CHECK(score.at("log_pml").is_number());
  CHECK(read_csv((root / "fit" / "cpo.csv").string()).values.rows() == 60);
}

TEST_CASE("fixed truncation keeps H constant") {
  const fs::path root = fresh_dir("fixed");
  REQUIRE(simulate(root, json{{"p", 6}, {"n", 50}}) == kExitOk);
  const json cfg = fit_config(json::object(), {{"burn_in", 50}, {"iterations", 50}, {"adapt", false}, {"initial_h", 2}},
                              {{"output", "fit"}});
  REQUIRE(quiet("fit", config_from_json(cfg, root.string())) == kExitOk);
  const DrawStore store = DrawStore::read((root / "fit" / "chain_0").string());
  for (const json& h : store.manifest.at("h_trajectory")) CHECK(h == 2);
}

TEST_CASE("an interrupted fit resumes to the same draws") {
  const fs::path root = fresh_dir("resume");
  REQUIRE(simulate(root, json{{"p", 6}, {"n", 50}}) == kExitOk);
  const json sampler = {{"burn_in", 60}, {"iterations", 80}, {"checkpoint_every", 25}};
  const json full = fit_config(json::object(), sampler, {{"seed", 9}, {"output", "full"}});
  const json part = fit_config(json::object(), sampler, {{"seed", 9}, {"output", "part"}});
  REQUIRE(quiet("fit", config_from_json(full, root.string())) == kExitOk);
  RunConfig stopped = config_from_json(part, root.string());
  stopped.sampler.stop_after = 77;
  REQUIRE(quiet("fit", stopped) == kExitOk);
  CHECK(json::parse(slurp(root / "part" / "manifest.json")).at("chains")[0].at("status") == "stopped");
  RunConfig resumed = config_from_json(part, root.string());
  resumed.resume = true;
  REQUIRE(quiet("fit", resumed) == kExitOk);
  CHECK(tree(root / "full" / "chain_0") == tree(root / "part" / "chain_0"));
}

TEST_CASE("post-processing refuses draws from a different model") {
  const fs::path root = fresh_dir("digest");
  REQUIRE(simulate(root, json{{"p", 6}, {"n", 40}}) == kExitOk);
  const json sampler = {{"burn_in", 20}, {"iterations", 20}};
  REQUIRE(quiet("fit", config_from_json(fit_config(json::object(), sampler, {{"output", "fit"}}), root.string())) ==
          kExitOk);
  const json other = fit_config(json{{"a1", 5.0}}, sampler, {{"output", "fit"}});
  CHECK(quiet("postprocess", config_from_json(other, root.string())) == kExitValidation);
  CHECK(quiet("score", config_from_json(other, root.string())) == kExitValidation);
}

TEST_CASE("scoring external predictions") {
  const fs::path dir = fresh_dir("score");
  write_file(dir / "y.csv", "a,b\n1,0\n0,1\n");
  write_file(dir / "half.csv", "a,b\n0.5,0.5\n0.5,0.5\n");
  const auto run = [&](const std::string& pred) {
    const json cfg = {{"score", {{"predictions", pred}, {"outcomes", "y.csv"}}}, {"run", {{"output", "out_" + pred}}}};
    REQUIRE(quiet("score", config_from_json(cfg, dir.string())) == kExitOk);
    return json::parse(slurp(dir / ("out_" + pred) / "score.json"));
  };
  const json perfect = run("y.csv");
  CHECK(perfect.at("brier") == 0.0);
  CHECK(perfect.at("log_score") == 0.0);
  const json half = run("half.csv");
  CHECK(half.at("brier") == -0.25);
  CHECK(half.at("log_score").get<double>() == doctest::Approx(-std::log(2.0)));
}

TEST_CASE("forecast rows per origin") {
  const fs::path root = fresh_dir("forecast");
  const json model = {{"kind", "dynamic"}, {"order", 1}, {"p", 4}, {"n", 30}};
  REQUIRE(simulate(root, model) == kExitOk);
  json cfg = fit_config(json{{"kind", "dynamic"}}, {{"burn_in", 40}, {"iterations", 40}}, {{"output", "fit"}});
  REQUIRE(quiet("fit", config_from_json(cfg, root.string())) == kExitOk);
  REQUIRE(quiet("forecast", config_from_json(cfg, root.string())) == kExitOk);
  CsvTable f = read_csv((root / "fit" / "forecast.csv").string());
  CHECK(f.values.rows() == 24);
  CHECK(f.values(0, 0) == 120.0);
  CHECK((f.values.col(3).array() <= f.values.col(4).array()).all());

  cfg["forecast"] = {{"origins", {40, 100}}, {"horizon", 6}};
  REQUIRE(quiet("forecast", config_from_json(cfg, root.string())) == kExitOk);
  f = read_csv((root / "fit" / "forecast.csv").string());
  CHECK(f.values.rows() == 12);
  CHECK(f.values(6, 0) == 100.0);

  const json static_cfg = fit_config(json::object(), {{"burn_in", 10}, {"iterations", 10}}, {{"output", "fit"}});
  CHECK(quiet("forecast", config_from_json(static_cfg, root.string())) == kExitValidation);
}
