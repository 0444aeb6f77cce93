#include "omfb/matrix.hpp"

#include <cmath>

namespace omfb {

double objective(const Vector& y, const Vector& x, const Matrix& C,
                 const Matrix& C_prev, double lambda) {
  if (C.rows() != y.size() || C.cols() != x.size())
    throw DimensionError("objective: C is " + std::to_string(C.rows()) + "x" +
                         std::to_string(C.cols()) + " but y has " +
                         std::to_string(y.size()) + " rows and x has " +
                         std::to_string(x.size()));
  if (C_prev.rows() != C.rows() || C_prev.cols() != C.cols())
    throw DimensionError("objective: C and C_prev shapes differ");
  if (lambda < 0.0) throw ArgumentError("objective: lambda must be >= 0");
  const double residual = (y - C * x).squaredNorm();
  const double drift = (C - C_prev).squaredNorm();
  return residual + lambda * drift;
}

Matrix solve_spd(const Matrix& A, const Matrix& B, double ridge_eps) {
  if (A.rows() != A.cols())
    throw DimensionError("solve_spd: A must be square");
  if (B.rows() != A.rows())
    throw DimensionError("solve_spd: B has " + std::to_string(B.rows()) +
                         " rows, expected " + std::to_string(A.rows()));
  if (ridge_eps < 0.0) throw ArgumentError("solve_spd: ridge_eps must be >= 0");
  const double asymmetry = (A - A.transpose()).norm();
  if (asymmetry > 1e-8 * A.norm())
    throw ArgumentError("solve_spd: A is not symmetric");

  Eigen::LLT<Matrix> llt(A);
  if (llt.info() == Eigen::Success) {
    Matrix Z = llt.solve(B);
    if (Z.allFinite()) return Z;
  }

  const double trace = A.trace();
  const double delta = trace > 0.0 ? ridge_eps * trace / double(A.rows()) : ridge_eps;
  Matrix ridged = A;
  ridged.diagonal().array() += delta;
  Eigen::LLT<Matrix> retry(ridged);
  if (retry.info() != Eigen::Success)
    throw NumericalError("solve_spd: matrix is not positive definite even after ridge");
  Matrix Z = retry.solve(B);
  if (!Z.allFinite())
    throw NumericalError("solve_spd: non-finite solution after ridge");
  return Z;
}

}  // namespace omfb
