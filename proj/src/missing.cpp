#include "omfb/missing.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "omfb/omfb.hpp"
#include "omfb/rng.hpp"
#include "omfb/sampler.hpp"

namespace omfb {

namespace {

void check_binary(const Vector& mask, const char* where) {
  for (Index i = 0; i < mask.size(); ++i)
    if (mask[i] != 0.0 && mask[i] != 1.0)
      throw ArgumentError(std::string(where) + ": mask entries must be 0 or 1");
}

}  // namespace

MaskedColumn::MaskedColumn(Vector values_in, Vector mask_in)
    : values(std::move(values_in)), mask(std::move(mask_in)) {
  if (values.size() != mask.size())
    throw DimensionError("MaskedColumn: values and mask lengths differ");
  check_binary(mask, "MaskedColumn");
  for (Index i = 0; i < values.size(); ++i) {
    if (mask[i] == 0.0)
      values[i] = 0.0;  // unobserved entries are ignored; keep them NaN-free
    else if (!std::isfinite(values[i]))
      throw ArgumentError("MaskedColumn: observed entries must be finite");
  }
}

Matrix expand_mask(const Vector& m_col, Index r) {
  if (r < 1) throw ArgumentError("expand_mask: r must be >= 1");
  check_binary(m_col, "expand_mask");
  return m_col.replicate(1, r);
}

MaskedCoefficients masked_solve_coefficients(const Matrix& C, const MaskedColumn& obs,
                                             double ridge_eps) {
  if (C.rows() != obs.values.size())
    throw DimensionError("masked_solve_coefficients: C rows differ from observation");
  if (obs.observed_count() == 0)
    return MaskedCoefficients{Vector::Zero(C.cols()), true};
  const Matrix masked_C = C.array().colwise() * obs.mask.array();
  const Vector masked_y = obs.mask.array() * obs.values.array();
  const Matrix gram = masked_C.transpose() * masked_C;
  const Matrix rhs = masked_C.transpose() * masked_y;
  return MaskedCoefficients{solve_spd(gram, rhs, ridge_eps), false};
}

Matrix masked_dictionary_update(const Matrix& C_prev, const Vector& x,
                                const MaskedColumn& obs, double lambda) {
  if (C_prev.rows() != obs.values.size() || C_prev.cols() != x.size())
    throw DimensionError("masked_dictionary_update: shapes do not conform");
  if (!(lambda > 0.0))
    throw ArgumentError("masked_dictionary_update: lambda must be > 0");
  const double denom = lambda + x.squaredNorm();
  const Vector residual =
      (obs.mask.array() * (obs.values - C_prev * x).array()).matrix();
  return C_prev + (residual * x.transpose()) / denom;
}

FactorState omfb_missing_run(const Matrix& Y, const Matrix& M,
                             const OmfbConfig& config, Trace& trace,
                             const Matrix* ground_truth, Trace* missing_trace,
                             std::size_t* skipped_columns) {
  config.validate();
  const Index m = Y.rows();
  const Index n = Y.cols();
  if (m < 1 || n < 1) throw ArgumentError("omfb_missing_run: Y must be nonempty");
  if (M.rows() != m || M.cols() != n)
    throw DimensionError("omfb_missing_run: mask shape differs from Y");
  if (ground_truth && (ground_truth->rows() != m || ground_truth->cols() != n))
    throw DimensionError("omfb_missing_run: ground truth shape differs from Y");

  FactorState state;
  state.dictionary = normal_matrix(m, config.rank, derive_seed(config.seed, kInitStream)) /
                     std::sqrt(double(config.rank));
  state.coefficients = Matrix::Zero(config.rank, n);

  ColumnSampler sampler(n, config.sampling, derive_seed(config.seed, kSampleStream));
  using clock = std::chrono::steady_clock;
  double elapsed = 0.0;
  std::int64_t samples = 0;
  std::size_t skipped = 0;
  double previous_error = std::numeric_limits<double>::infinity();
  const Matrix hidden = Matrix::Ones(m, n) - M;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = clock::now();
    for (Index i = 0; i < n; ++i) {
      const Index k = sampler.next();
      MaskedColumn obs(Y.col(k), M.col(k));
      if (obs.observed_count() == 0) {
        ++skipped;
        continue;
      }
      const Matrix anchor = state.dictionary;
      Vector x = state.coefficients.col(k);
      Matrix C = anchor;
      for (int it = 0; it < config.inner_iters; ++it) {
        x = masked_solve_coefficients(C, obs, config.ridge_eps).x;
        C = masked_dictionary_update(anchor, x, obs, config.lambda);
      }
      state.dictionary = C;
      state.coefficients.col(k) = x;
      state.step_counter += 1;
    }
    elapsed += std::chrono::duration<double>(clock::now() - start).count();
    samples += n;
    const double error =
        reconstruction_error(Y, state.dictionary, state.coefficients, &M);
    trace.record(samples, elapsed, error);
    if (ground_truth && missing_trace)
      missing_trace->record(samples, elapsed,
                            reconstruction_error(*ground_truth, state.dictionary,
                                                 state.coefficients, &hidden));
    if (config.early_stop && previous_error - error < 1e-6 * previous_error) break;
    previous_error = error;
  }
  if (skipped_columns) *skipped_columns = skipped;
  return state;
}

Matrix impute(const FactorState& state, const Matrix& M, const Matrix& Y_obs) {
  if (M.rows() != Y_obs.rows() || M.cols() != Y_obs.cols())
    throw DimensionError("impute: mask shape differs from data");
  if (state.dictionary.rows() != Y_obs.rows() ||
      state.coefficients.cols() != Y_obs.cols())
    throw DimensionError("impute: state shape differs from data");
  const Matrix reconstruction = state.dictionary * state.coefficients;
  return (M.array() * Y_obs.array() + (1.0 - M.array()) * reconstruction.array())
      .matrix();
}

}  // namespace omfb
