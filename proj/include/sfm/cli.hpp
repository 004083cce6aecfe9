#pragma once

// File formats, run configuration and the batch commands behind the `sfm`
// executable. Commands return process exit codes.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sfm/model.hpp"

namespace sfm {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 2,
  kExitNumerical = 3,
  kExitPartial = 4,
};

struct CsvTable {
  std::vector<std::string> header;
  MatrixXd values;
};

/// Comma-separated values with one header row. Empty cells and non-numeric
/// entries raise DataError naming the file, line and column.
CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const std::vector<std::string>& header, const MatrixXd& values);

/// A p x p distance matrix whose header row (and optional leading label
/// column, signalled by an empty first header cell) must list `labels` in
/// order.
MatrixXd read_distance_csv(const std::string& path, const std::vector<std::string>& labels);

struct RunConfig {
  FactorModelSpec spec;
  SamplerConfig sampler;
  nlohmann::json phi;  // family description, resolved once the data are known

  std::string y_path;
  std::string w_path;
  std::string x_path;
  std::string output = "sfm_out";
  int chains = 1;
  int threads = 1;
  bool resume = false;

  int simulate_k = 3;

  Index horizon = 24;
  std::vector<Index> origins;   // hours; empty means the end of the observed periods
  Index observed_periods = -1;  // forecasting: -1 means all rows of y

  int folds = 0;  // > 0 holds out fold `fold` of a k-fold split
  int fold = 0;

  std::string predictions_path;  // score: external predicted probabilities
  std::string outcomes_path;
};

/// Reads a JSON config; relative paths are resolved against its directory.
RunConfig load_config(const std::string& path);
RunConfig config_from_json(const nlohmann::json& j, const std::string& base_dir);

/// Training data for the configured model with the spec completed from the
/// files (p, n, c, q and Phi). Applies the fold hold-out when configured;
/// `held_out` receives the held-out rows.
Dataset load_dataset(RunConfig& config, Dataset* held_out = nullptr);

int cmd_simulate(const RunConfig& config);
int cmd_fit(RunConfig config);
int cmd_postprocess(RunConfig config);
int cmd_forecast(RunConfig config);
int cmd_score(RunConfig config);

/// Dispatch by command name; maps exceptions to exit codes and prints the
/// message to stderr.
int run_command(const std::string& command, RunConfig config);

}  // namespace sfm
