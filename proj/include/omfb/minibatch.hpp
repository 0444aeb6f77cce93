#pragma once

#include <vector>

#include "omfb/config.hpp"
#include "omfb/matrix.hpp"
#include "omfb/metrics.hpp"
#include "omfb/omfb.hpp"

namespace omfb {

/// A set of distinct column indices and the matching data columns.
struct MiniBatch {
  std::vector<Index> indices;
  Matrix data;  // m x |indices|

  MiniBatch(std::vector<Index> idx, Matrix cols);
};

/// Coefficients for every column of Yb with a single factorization of C^T C.
Matrix solve_coefficients_batch(const Matrix& C, const Matrix& Yb, double ridge_eps);

/// Batched dictionary update
/// (lambda C_prev + Yb Xb^T)(lambda I + Xb Xb^T)^{-1}, through either an
/// r x r symmetric solve or the Woodbury identity (b x b solve).
Matrix dictionary_update_batch(const Matrix& C_prev, const Matrix& Xb,
                               const Matrix& Yb, double lambda,
                               BatchSolver solver = BatchSolver::direct);

/// One alternating step on a mini-batch; anchors the Frobenius penalty at the
/// step-entry dictionary and writes the batch coefficients back into state.
/// half_objectives carries the batch analog of the per-observation cost.
StepReport minibatch_step(FactorState& state, const MiniBatch& batch,
                          const OmfbConfig& config);

/// Mini-batch run: each step draws batch_size distinct columns, alternates
/// inner_iters times, and a TraceRecord is emitted per pass over the data.
FactorState minibatch_run(const Matrix& Y, Index batch_size,
                          const OmfbConfig& config, Trace& trace);

}  // namespace omfb
