#pragma once

#include <string>

#include "sfm/draw_store.hpp"
#include "sfm/inference.hpp"

namespace sfm {

/// Where a chain keeps its files. With an empty directory nothing is written.
struct ChainIo {
  std::string dir;
  bool resume = false;  // continue from dir/checkpoint if present
};

/// Burn-in plus sampling with thinning and truncation adaptation. Stored
/// draws are taken after the sweep and before adaptation. On a numerical
/// failure the partial store is written (status "failed") and the error is
/// rethrown with its iteration.
DrawStore run_chain(const FactorModelSpec& spec, const Dataset& data, const SamplerConfig& config,
                    const ChainIo& io = {});

/// Parameters of one stored draw.
struct PosteriorDraw {
  MatrixXd lambda;
  VectorXd sigma2;
  MatrixXd beta;
  MatrixXd kappa;
  VectorXd theta;
  VectorXd rho;
  double varsigma_check = 0.0;
  std::vector<MatrixXd> a;
  MatrixXd eta;  // empty unless factors were stored
};

PosteriorDraw decode_draw(const DrawStore& store, Index draw);

}  // namespace sfm
