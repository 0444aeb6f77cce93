#include "omfb/omfb.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "omfb/rng.hpp"
#include "omfb/sampler.hpp"

namespace omfb {

Vector solve_coefficients(const Matrix& C, const Vector& y, double ridge_eps) {
  if (C.rows() != y.size())
    throw DimensionError("solve_coefficients: C has " + std::to_string(C.rows()) +
                         " rows but y has " + std::to_string(y.size()));
  const Matrix gram = C.transpose() * C;
  const Matrix rhs = C.transpose() * y;
  return solve_spd(gram, rhs, ridge_eps);
}

Matrix dictionary_update_direct(const Matrix& C_prev, const Vector& x,
                                const Vector& y, double lambda) {
  if (C_prev.rows() != y.size() || C_prev.cols() != x.size())
    throw DimensionError("dictionary_update_direct: shapes do not conform");
  if (!(lambda > 0.0))
    throw ArgumentError("dictionary_update_direct: lambda must be > 0");
  Matrix numerator = lambda * C_prev + y * x.transpose();  // m x r
  Matrix system = x * x.transpose();                       // r x r
  system.diagonal().array() += lambda;
  // C system = numerator, system symmetric
  return solve_spd(system, numerator.transpose(), 0.0).transpose();
}

Matrix dictionary_update_rank1(const Matrix& C_prev, const Vector& x,
                               const Vector& y, double lambda) {
  if (C_prev.rows() != y.size() || C_prev.cols() != x.size())
    throw DimensionError("dictionary_update_rank1: shapes do not conform");
  if (lambda < 0.0)
    throw ArgumentError("dictionary_update_rank1: lambda must be >= 0");
  const double denom = lambda + x.squaredNorm();
  if (denom == 0.0)
    throw NumericalError("dictionary_update_rank1: lambda and x both zero");
  const Vector residual = y - C_prev * x;
  return C_prev + (residual * x.transpose()) / denom;
}

StepReport omfb_step(FactorState& state, const Vector& y, Index k,
                     const OmfbConfig& config) {
  const Index n = state.coefficients.cols();
  if (y.size() != state.dictionary.rows())
    throw DimensionError("omfb_step: y length differs from dictionary rows");
  if (k < 0 || k >= n) throw ArgumentError("omfb_step: column index out of range");

  const Matrix anchor = state.dictionary;  // C_{t-1}, frozen for the whole step
  Vector x = state.coefficients.col(k);
  Matrix C = anchor;

  StepReport report;
  report.column_index = k;
  report.half_objectives.push_back(objective(y, x, C, anchor, config.lambda));
  for (int it = 0; it < config.inner_iters; ++it) {
    x = solve_coefficients(C, y, config.ridge_eps);
    report.half_objectives.push_back(objective(y, x, C, anchor, config.lambda));
    C = dictionary_update_rank1(anchor, x, y, config.lambda);
    report.half_objectives.push_back(objective(y, x, C, anchor, config.lambda));
  }

  state.dictionary = C;
  state.coefficients.col(k) = x;
  state.step_counter += 1;

  report.objective_before = report.half_objectives.front();
  report.objective_after = report.half_objectives.back();
  report.residual_norm = (y - C * x).norm();
  return report;
}

FactorState omfb_run(const Matrix& Y, const OmfbConfig& config, Trace& trace) {
  config.validate();
  const Index m = Y.rows();
  const Index n = Y.cols();
  if (m < 1 || n < 1) throw ArgumentError("omfb_run: Y must be nonempty");

  FactorState state;
  state.dictionary = normal_matrix(m, config.rank, derive_seed(config.seed, kInitStream)) /
                     std::sqrt(double(config.rank));
  state.coefficients = Matrix::Zero(config.rank, n);

  ColumnSampler sampler(n, config.sampling, derive_seed(config.seed, kSampleStream));
  using clock = std::chrono::steady_clock;
  double elapsed = 0.0;
  std::int64_t samples = 0;
  double previous_error = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = clock::now();
    for (Index i = 0; i < n; ++i) {
      const Index k = sampler.next();
      omfb_step(state, Y.col(k), k, config);
    }
    elapsed += std::chrono::duration<double>(clock::now() - start).count();
    samples += n;
    const double error = reconstruction_error(Y, state.dictionary, state.coefficients);
    trace.record(samples, elapsed, error);
    if (config.early_stop && previous_error - error < 1e-6 * previous_error) break;
    previous_error = error;
  }
  return state;
}

}  // namespace omfb
