#pragma once

#include <vector>

#include "omfb/config.hpp"
#include "omfb/matrix.hpp"
#include "omfb/metrics.hpp"

namespace omfb {

/// Diagnostics for one alternating step on a single column.
/// half_objectives holds the per-observation cost at step entry and after
/// every half-update (coefficient solve, then dictionary update), so descent
/// is checkable at each alternation; front() == objective_before and
/// back() == objective_after.
struct StepReport {
  Index column_index = 0;
  double objective_before = 0.0;
  double objective_after = 0.0;
  double residual_norm = 0.0;
  std::vector<double> half_objectives;
};

/// Least-squares coefficients x = (C^T C)^{-1} C^T y through the shared
/// symmetric solver.
Vector solve_coefficients(const Matrix& C, const Vector& y, double ridge_eps);

/// Dictionary update in its pre-Sherman-Morrison form
/// (lambda C_prev + y x^T)(lambda I + x x^T)^{-1}, evaluated with an explicit
/// r x r solve. Kept as the oracle for the rank-one form.
Matrix dictionary_update_direct(const Matrix& C_prev, const Vector& x,
                                const Vector& y, double lambda);

/// Broyden-style rank-one dictionary update
/// C_prev + (y - C_prev x) x^T / (lambda + x^T x); O(mr).
Matrix dictionary_update_rank1(const Matrix& C_prev, const Vector& x,
                               const Vector& y, double lambda);

/// One step on column k: inner_iters alternations of coefficient solve and
/// rank-one dictionary update, the Frobenius penalty anchored at the
/// dictionary held at step entry. Stores the final coefficients into
/// state.coefficients column k and advances the step counter.
StepReport omfb_step(FactorState& state, const Vector& y, Index k,
                     const OmfbConfig& config);

/// Streams columns of Y for config.epochs passes, sampling per
/// config.sampling; the dictionary starts from seeded standard normals
/// scaled by 1/sqrt(rank). After each pass over n columns a TraceRecord with
/// the full-data error is appended to trace.
FactorState omfb_run(const Matrix& Y, const OmfbConfig& config, Trace& trace);

}  // namespace omfb
