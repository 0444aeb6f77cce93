#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace omfb {

using Matrix = Eigen::MatrixXd;  // column-major; observations are contiguous columns
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Shape mismatch between operands.
class DimensionError : public std::invalid_argument {
 public:
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

/// Invalid value for an argument (out of range, wrong enum, non-binary mask, ...).
class ArgumentError : public std::invalid_argument {
 public:
  explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

/// Unreadable or unwritable file.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed file contents; message carries a 1-based row/column location.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical breakdown (degenerate update step, undefined SNR, failed factorization).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Value of ||y - C x||^2 + lambda ||C - C_prev||_F^2, the per-observation cost
/// minimized by one factorization step.
double objective(const Vector& y, const Vector& x, const Matrix& C,
                 const Matrix& C_prev, double lambda);

/// Solves (A + delta I) Z = B for symmetric A by Cholesky factorization.
/// delta is 0 when A is numerically positive definite; otherwise
/// delta = ridge_eps * trace(A) / n (ridge_eps when the trace vanishes).
/// Throws ArgumentError when A is not symmetric within 1e-8 * ||A||_F.
Matrix solve_spd(const Matrix& A, const Matrix& B, double ridge_eps);

}  // namespace omfb
