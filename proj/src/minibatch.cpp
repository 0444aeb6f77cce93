#include "omfb/minibatch.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "omfb/rng.hpp"
#include "omfb/sampler.hpp"

namespace omfb {

MiniBatch::MiniBatch(std::vector<Index> idx, Matrix cols)
    : indices(std::move(idx)), data(std::move(cols)) {
  if (indices.empty()) throw ArgumentError("MiniBatch: at least one index required");
  if (Index(indices.size()) != data.cols())
    throw DimensionError("MiniBatch: index count differs from data columns");
  std::unordered_set<Index> seen(indices.begin(), indices.end());
  if (seen.size() != indices.size())
    throw ArgumentError("MiniBatch: indices must be distinct");
}

Matrix solve_coefficients_batch(const Matrix& C, const Matrix& Yb, double ridge_eps) {
  if (C.rows() != Yb.rows())
    throw DimensionError("solve_coefficients_batch: C and Yb row counts differ");
  const Matrix gram = C.transpose() * C;
  const Matrix rhs = C.transpose() * Yb;
  return solve_spd(gram, rhs, ridge_eps);
}

Matrix dictionary_update_batch(const Matrix& C_prev, const Matrix& Xb,
                               const Matrix& Yb, double lambda,
                               BatchSolver solver) {
  if (C_prev.rows() != Yb.rows() || C_prev.cols() != Xb.rows() ||
      Xb.cols() != Yb.cols())
    throw DimensionError("dictionary_update_batch: shapes do not conform");
  if (!(lambda > 0.0))
    throw ArgumentError("dictionary_update_batch: lambda must be > 0");

  const Matrix numerator = lambda * C_prev + Yb * Xb.transpose();  // m x r
  if (solver == BatchSolver::direct) {
    Matrix system = Xb * Xb.transpose();  // r x r
    system.diagonal().array() += lambda;
    return solve_spd(system, numerator.transpose(), 0.0).transpose();
  }
  // Woodbury: (lambda I + X X^T)^{-1} = (I - X (lambda I + X^T X)^{-1} X^T) / lambda
  Matrix small = Xb.transpose() * Xb;  // b x b
  small.diagonal().array() += lambda;
  const Matrix nx = numerator * Xb;                             // m x b
  const Matrix corr = solve_spd(small, nx.transpose(), 0.0).transpose();  // m x b
  return (numerator - corr * Xb.transpose()) / lambda;
}

StepReport minibatch_step(FactorState& state, const MiniBatch& batch,
                          const OmfbConfig& config) {
  const Index n = state.coefficients.cols();
  const Index b = Index(batch.indices.size());
  if (batch.data.rows() != state.dictionary.rows())
    throw DimensionError("minibatch_step: batch rows differ from dictionary rows");
  for (Index k : batch.indices)
    if (k < 0 || k >= n) throw ArgumentError("minibatch_step: column index out of range");

  if (b == 1)  // reduces exactly to the single-column step
    return omfb_step(state, batch.data.col(0), batch.indices[0], config);

  const Matrix anchor = state.dictionary;
  Matrix X(state.coefficients.rows(), b);
  for (Index j = 0; j < b; ++j) X.col(j) = state.coefficients.col(batch.indices[j]);
  Matrix C = anchor;

  auto batch_objective = [&](const Matrix& Xc, const Matrix& Cc) {
    return (batch.data - Cc * Xc).squaredNorm() +
           config.lambda * (Cc - anchor).squaredNorm();
  };

  StepReport report;
  report.column_index = batch.indices[0];
  report.half_objectives.push_back(batch_objective(X, C));
  for (int it = 0; it < config.inner_iters; ++it) {
    X = solve_coefficients_batch(C, batch.data, config.ridge_eps);
    report.half_objectives.push_back(batch_objective(X, C));
    C = dictionary_update_batch(anchor, X, batch.data, config.lambda,
                                config.batch_solver);
    report.half_objectives.push_back(batch_objective(X, C));
  }

  state.dictionary = C;
  for (Index j = 0; j < b; ++j) state.coefficients.col(batch.indices[j]) = X.col(j);
  state.step_counter += 1;

  report.objective_before = report.half_objectives.front();
  report.objective_after = report.half_objectives.back();
  report.residual_norm = (batch.data - C * X).norm();
  return report;
}

FactorState minibatch_run(const Matrix& Y, Index batch_size,
                          const OmfbConfig& config, Trace& trace) {
  config.validate();
  const Index m = Y.rows();
  const Index n = Y.cols();
  if (m < 1 || n < 1) throw ArgumentError("minibatch_run: Y must be nonempty");
  if (batch_size < 1 || batch_size > n)
    throw ArgumentError("minibatch_run: batch_size must be in [1, n]");

  FactorState state;
  state.dictionary = normal_matrix(m, config.rank, derive_seed(config.seed, kInitStream)) /
                     std::sqrt(double(config.rank));
  state.coefficients = Matrix::Zero(config.rank, n);

  ColumnSampler sampler(n, config.sampling, derive_seed(config.seed, kSampleStream),
                        batch_size);
  const Index steps_per_epoch = (n + batch_size - 1) / batch_size;
  using clock = std::chrono::steady_clock;
  double elapsed = 0.0;
  std::int64_t samples = 0;
  double previous_error = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = clock::now();
    for (Index s = 0; s < steps_per_epoch; ++s) {
      const auto indices = sampler.next_batch();
      Matrix cols(m, Index(indices.size()));
      for (Index j = 0; j < Index(indices.size()); ++j) cols.col(j) = Y.col(indices[j]);
      minibatch_step(state, MiniBatch(indices, std::move(cols)), config);
      samples += Index(indices.size());
    }
    elapsed += std::chrono::duration<double>(clock::now() - start).count();
    const double error = reconstruction_error(Y, state.dictionary, state.coefficients);
    trace.record(samples, elapsed, error);
    if (config.early_stop && previous_error - error < 1e-6 * previous_error) break;
    previous_error = error;
  }
  return state;
}

}  // namespace omfb
