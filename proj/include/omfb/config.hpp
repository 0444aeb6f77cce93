#pragma once

#include <cstdint>

#include "omfb/matrix.hpp"
#include "omfb/sampler.hpp"

namespace omfb {

/// Dictionary-update route for mini-batch steps: an r x r solve of
/// lambda I + X X^T, or the Woodbury identity through a b x b solve.
enum class BatchSolver { direct, woodbury };

struct OmfbConfig {
  int rank = 30;
  double lambda = 10.0;
  int inner_iters = 2;
  int epochs = 30;
  Sampling sampling = Sampling::uniform_random;
  std::uint64_t seed = 0;
  double ridge_eps = 1e-10;
  // stop early once the per-epoch trace error improves by < 1e-6 relative
  bool early_stop = false;
  BatchSolver batch_solver = BatchSolver::direct;

  void validate() const {
    if (rank < 1) throw ArgumentError("config: rank must be >= 1");
    if (!(lambda > 0.0)) throw ArgumentError("config: lambda must be > 0");
    if (inner_iters < 1) throw ArgumentError("config: inner_iters must be >= 1");
    if (epochs < 0) throw ArgumentError("config: epochs must be >= 0");
    if (ridge_eps < 0.0) throw ArgumentError("config: ridge_eps must be >= 0");
  }
};

/// Current dictionary estimate plus the materialized coefficient matrix;
/// columns never visited stay zero so the full-data error is always defined.
struct FactorState {
  Matrix dictionary;    // m x r
  Matrix coefficients;  // r x n
  long step_counter = 0;
};

}  // namespace omfb
