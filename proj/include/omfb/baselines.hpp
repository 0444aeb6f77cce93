#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "omfb/matrix.hpp"
#include "omfb/metrics.hpp"
#include "omfb/sampler.hpp"

namespace omfb {

/// Power-decay step sizes gamma_t = alpha / t^beta with beta in (0.5, 1], so
/// the sums of gamma_t diverge while the sums of gamma_t^2 stay finite.
struct StepSchedule {
  double alpha = 0.1;
  double beta = 0.6;

  StepSchedule() = default;
  StepSchedule(double alpha_in, double beta_in);
  double at(long t) const;
};

/// Whether the coefficient step size decays with the global step counter or
/// with per-column visit counts (one step size per mini-batch index).
enum class HStepMode { shared, per_column };

struct SgmfState {
  Matrix W;  // m x r
  Matrix H;  // r x n
  long t = 1;
  StepSchedule w_schedule;
  StepSchedule h_schedule;
  HStepMode h_mode = HStepMode::shared;
  std::vector<long> column_visits;  // used by per_column mode
};

/// Gradients of ||y - W h||_2^2: (-2 (y - W h) h^T, -2 W^T (y - W h)).
std::pair<Matrix, Vector> sgmf_gradients(const Matrix& W, const Vector& h,
                                         const Vector& y);

/// One stochastic gradient step on column k: W first, then h against the
/// updated W; advances t.
void sgmf_step(SgmfState& state, const Vector& y, Index k);

/// Stochastic gradient matrix factorization run. Sampling mirrors the
/// factorization runs (same seed derivation and sampler), so benchmark arms
/// under a shared seed see identical column streams.
SgmfState sgmf_run(const Matrix& Y, int rank, const StepSchedule& w_schedule,
                   const StepSchedule& h_schedule, int epochs, Index batch_size,
                   std::uint64_t seed, Trace& trace,
                   HStepMode h_mode = HStepMode::shared,
                   Sampling sampling = Sampling::uniform_random);

/// One multiplicative update sweep (W, then H against the updated W);
/// nonnegativity is preserved and the Frobenius error never increases.
std::pair<Matrix, Matrix> nmf_mu_step(const Matrix& W, const Matrix& H,
                                      const Matrix& Y, double eps = 1e-12);

/// Masked multiplicative update: Y and W H enter the ratios through the mask.
std::pair<Matrix, Matrix> nmf_mu_step_masked(const Matrix& W, const Matrix& H,
                                             const Matrix& Y, const Matrix& M,
                                             double eps = 1e-12);

/// Batch NMF with multiplicative updates; masked when a mask is supplied.
/// Factors start from |N(0,1)| scaled to the data mean.
std::pair<Matrix, Matrix> nmf_run(const Matrix& Y, int rank, int iterations,
                                  std::uint64_t seed, const Matrix* mask = nullptr);

}  // namespace omfb
