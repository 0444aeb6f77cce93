#include "omfb/baselines.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "omfb/rng.hpp"

namespace omfb {

StepSchedule::StepSchedule(double alpha_in, double beta_in)
    : alpha(alpha_in), beta(beta_in) {
  if (alpha < 0.0) throw ArgumentError("StepSchedule: alpha must be >= 0");
  if (!(beta > 0.5) || !(beta <= 1.0))
    throw ArgumentError("StepSchedule: beta must lie in (0.5, 1]");
}

double StepSchedule::at(long t) const {
  if (t < 1) throw ArgumentError("StepSchedule: t starts at 1");
  return alpha / std::pow(double(t), beta);
}

std::pair<Matrix, Vector> sgmf_gradients(const Matrix& W, const Vector& h,
                                         const Vector& y) {
  if (W.rows() != y.size() || W.cols() != h.size())
    throw DimensionError("sgmf_gradients: shapes do not conform");
  const Vector residual = y - W * h;
  Matrix grad_W = -2.0 * residual * h.transpose();
  Vector grad_h = -2.0 * W.transpose() * residual;
  return {std::move(grad_W), std::move(grad_h)};
}

namespace {

double h_step_size(const SgmfState& state, Index k) {
  if (state.h_mode == HStepMode::per_column)
    return state.h_schedule.at(state.column_visits[std::size_t(k)]);
  return state.h_schedule.at(state.t);
}

}  // namespace

void sgmf_step(SgmfState& state, const Vector& y, Index k) {
  if (k < 0 || k >= state.H.cols())
    throw ArgumentError("sgmf_step: column index out of range");
  if (state.h_mode == HStepMode::per_column)
    state.column_visits[std::size_t(k)] += 1;

  Vector h = state.H.col(k);
  const Vector residual_w = y - state.W * h;
  state.W += state.w_schedule.at(state.t) * 2.0 * residual_w * h.transpose();

  const Vector residual_h = y - state.W * h;  // against the updated W
  h += h_step_size(state, k) * 2.0 * state.W.transpose() * residual_h;
  state.H.col(k) = h;
  state.t += 1;
}

SgmfState sgmf_run(const Matrix& Y, int rank, const StepSchedule& w_schedule,
                   const StepSchedule& h_schedule, int epochs, Index batch_size,
                   std::uint64_t seed, Trace& trace, HStepMode h_mode,
                   Sampling sampling) {
  const Index m = Y.rows();
  const Index n = Y.cols();
  if (m < 1 || n < 1) throw ArgumentError("sgmf_run: Y must be nonempty");
  if (rank < 1) throw ArgumentError("sgmf_run: rank must be >= 1");
  if (epochs < 0) throw ArgumentError("sgmf_run: epochs must be >= 0");
  if (batch_size < 1 || batch_size > n)
    throw ArgumentError("sgmf_run: batch_size must be in [1, n]");

  SgmfState state;
  state.W = normal_matrix(m, rank, derive_seed(seed, kInitStream)) /
            std::sqrt(double(rank));
  state.H = Matrix::Zero(rank, n);
  state.w_schedule = w_schedule;
  state.h_schedule = h_schedule;
  state.h_mode = h_mode;
  if (h_mode == HStepMode::per_column)
    state.column_visits.assign(std::size_t(n), 0);

  ColumnSampler sampler(n, sampling, derive_seed(seed, kSampleStream), batch_size);
  const Index steps_per_epoch = (n + batch_size - 1) / batch_size;
  using clock = std::chrono::steady_clock;
  double elapsed = 0.0;
  std::int64_t samples = 0;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto start = clock::now();
    for (Index s = 0; s < steps_per_epoch; ++s) {
      const auto indices = sampler.next_batch();
      if (indices.size() == 1) {
        sgmf_step(state, Y.col(indices[0]), indices[0]);
      } else {
        const Index b = Index(indices.size());
        Matrix Yb(m, b);
        Matrix Hb(rank, b);
        for (Index j = 0; j < b; ++j) {
          Yb.col(j) = Y.col(indices[j]);
          Hb.col(j) = state.H.col(indices[j]);
          if (h_mode == HStepMode::per_column)
            state.column_visits[std::size_t(indices[j])] += 1;
        }
        const Matrix residual_w = Yb - state.W * Hb;
        state.W += state.w_schedule.at(state.t) * 2.0 * residual_w * Hb.transpose();
        const Matrix residual_h = Yb - state.W * Hb;
        const Matrix grad_h = -2.0 * state.W.transpose() * residual_h;
        for (Index j = 0; j < b; ++j) {
          const double gamma = h_mode == HStepMode::per_column
                                   ? h_schedule.at(state.column_visits[std::size_t(indices[j])])
                                   : h_schedule.at(state.t);
          state.H.col(indices[j]) = Hb.col(j) - gamma * grad_h.col(j);
        }
        state.t += 1;
      }
      samples += Index(indices.size());
    }
    elapsed += std::chrono::duration<double>(clock::now() - start).count();
    double error = reconstruction_error(Y, state.W, state.H);
    if (!std::isfinite(error)) error = std::numeric_limits<double>::infinity();
    trace.record(samples, elapsed, error);
  }
  return state;
}

namespace {

void check_nonnegative(const Matrix& A, const char* name) {
  if ((A.array() < 0.0).any())
    throw ArgumentError(std::string("nmf: ") + name + " has negative entries");
}

}  // namespace

std::pair<Matrix, Matrix> nmf_mu_step(const Matrix& W, const Matrix& H,
                                      const Matrix& Y, double eps) {
  if (W.rows() != Y.rows() || H.cols() != Y.cols() || W.cols() != H.rows())
    throw DimensionError("nmf_mu_step: shapes do not conform");
  check_nonnegative(W, "W");
  check_nonnegative(H, "H");
  check_nonnegative(Y, "Y");
  Matrix Wn = W.array() * (Y * H.transpose()).array() /
              ((W * (H * H.transpose())).array() + eps);
  Matrix Hn = H.array() * (Wn.transpose() * Y).array() /
              (((Wn.transpose() * Wn) * H).array() + eps);
  return {std::move(Wn), std::move(Hn)};
}

std::pair<Matrix, Matrix> nmf_mu_step_masked(const Matrix& W, const Matrix& H,
                                             const Matrix& Y, const Matrix& M,
                                             double eps) {
  if (W.rows() != Y.rows() || H.cols() != Y.cols() || W.cols() != H.rows())
    throw DimensionError("nmf_mu_step_masked: shapes do not conform");
  if (M.rows() != Y.rows() || M.cols() != Y.cols())
    throw DimensionError("nmf_mu_step_masked: mask shape differs");
  const Matrix masked_Y = M.array() * Y.array();
  check_nonnegative(W, "W");
  check_nonnegative(H, "H");
  check_nonnegative(masked_Y, "Y (observed entries)");
  const Matrix masked_WH = (M.array() * (W * H).array()).matrix();
  Matrix Wn = W.array() * (masked_Y * H.transpose()).array() /
              ((masked_WH * H.transpose()).array() + eps);
  const Matrix masked_WnH = (M.array() * (Wn * H).array()).matrix();
  Matrix Hn = H.array() * (Wn.transpose() * masked_Y).array() /
              ((Wn.transpose() * masked_WnH).array() + eps);
  return {std::move(Wn), std::move(Hn)};
}

std::pair<Matrix, Matrix> nmf_run(const Matrix& Y, int rank, int iterations,
                                  std::uint64_t seed, const Matrix* mask) {
  const Index m = Y.rows();
  const Index n = Y.cols();
  if (m < 1 || n < 1) throw ArgumentError("nmf_run: Y must be nonempty");
  if (rank < 1) throw ArgumentError("nmf_run: rank must be >= 1");
  if (iterations < 0) throw ArgumentError("nmf_run: iterations must be >= 0");
  if (mask && (mask->rows() != m || mask->cols() != n))
    throw DimensionError("nmf_run: mask shape differs from Y");

  double mean;
  if (mask) {
    const Matrix masked_Y = mask->array() * Y.array();
    check_nonnegative(masked_Y, "Y (observed entries)");
    const double observed = mask->sum();
    mean = observed > 0.0 ? masked_Y.sum() / observed : 0.0;
  } else {
    check_nonnegative(Y, "Y");
    mean = Y.mean();
  }
  const double scale = std::sqrt(std::max(mean, 0.0) / double(rank));

  Matrix W = normal_matrix(m, rank, derive_seed(seed, kInitStream)).cwiseAbs() * scale;
  Matrix H = normal_matrix(rank, n, derive_seed(seed, kInitStream + 16)).cwiseAbs() * scale;

  for (int it = 0; it < iterations; ++it) {
    auto next = mask ? nmf_mu_step_masked(W, H, Y, *mask) : nmf_mu_step(W, H, Y);
    W = std::move(next.first);
    H = std::move(next.second);
  }
  return {std::move(W), std::move(H)};
}

}  // namespace omfb
