#pragma once

#include <cstddef>

#include "omfb/config.hpp"
#include "omfb/matrix.hpp"
#include "omfb/metrics.hpp"

namespace omfb {

/// Observation vector with a binary mask; entries where the mask is 0 are
/// unobserved and stored as 0 so the numerics stay NaN-free.
struct MaskedColumn {
  Vector values;
  Vector mask;

  MaskedColumn(Vector values_in, Vector mask_in);
  Index observed_count() const { return Index(mask.sum()); }
};

/// m x r matrix whose r columns all equal the mask vector.
Matrix expand_mask(const Vector& m_col, Index r);

/// Result of a masked coefficient solve; fully_unobserved marks an all-zero
/// mask (x is then 0, carrying no information).
struct MaskedCoefficients {
  Vector x;
  bool fully_unobserved = false;
};

/// argmin_x ||m . (y - C x)||_2^2 through the Hadamard-masked normal
/// equations; equals ordinary least squares on the observed rows.
MaskedCoefficients masked_solve_coefficients(const Matrix& C, const MaskedColumn& obs,
                                             double ridge_eps);

/// Rank-one dictionary update driven by the masked residual
/// m . (y - C_prev x); rows with mask 0 are returned unchanged.
Matrix masked_dictionary_update(const Matrix& C_prev, const Vector& x,
                                const MaskedColumn& obs, double lambda);

/// Missing-data run: streams masked columns for config.epochs passes. Trace
/// error covers observed entries; when ground truth is supplied, a second
/// trace with the missing-entry error is filled. Columns with an all-zero
/// mask are skipped and counted.
FactorState omfb_missing_run(const Matrix& Y, const Matrix& M,
                             const OmfbConfig& config, Trace& trace,
                             const Matrix* ground_truth = nullptr,
                             Trace* missing_trace = nullptr,
                             std::size_t* skipped_columns = nullptr);

/// Y_obs at observed entries, C X at unobserved entries.
Matrix impute(const FactorState& state, const Matrix& M, const Matrix& Y_obs);

}  // namespace omfb
