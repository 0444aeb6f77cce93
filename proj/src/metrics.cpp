#include "omfb/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

namespace omfb {

void Trace::record(std::int64_t samples, double seconds, double error) {
  if (!(error >= 0.0))
    throw ArgumentError("trace: frobenius_error must be >= 0");
  if (!records_.empty()) {
    if (samples < records_.back().samples)
      throw ArgumentError("trace: samples_processed must be nondecreasing");
    if (seconds < records_.back().seconds)
      throw ArgumentError("trace: wall_seconds must be nondecreasing");
  } else if (samples < 0 || seconds < 0.0) {
    throw ArgumentError("trace: samples and seconds must be nonnegative");
  }
  records_.push_back(TraceRecord{samples, seconds, error});
}

void Trace::write_csv(std::ostream& out) const {
  out << "samples,seconds,frobenius_error\n";
  char buf[64];
  for (const auto& rec : records_) {
    out << rec.samples << ',';
    std::snprintf(buf, sizeof buf, "%.17g", rec.seconds);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", rec.error);
    out << buf << '\n';
  }
}

void Trace::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  write_csv(out);
  if (!out.good()) throw IoError("write failed: " + path);
}

double reconstruction_error(const Matrix& Y, const Matrix& C, const Matrix& X,
                            const Matrix* mask) {
  if (C.rows() != Y.rows() || X.cols() != Y.cols() || C.cols() != X.rows())
    throw DimensionError("reconstruction_error: Y, C, X shapes do not conform");
  Matrix residual = Y - C * X;
  if (mask) {
    if (mask->rows() != Y.rows() || mask->cols() != Y.cols())
      throw DimensionError("reconstruction_error: mask shape differs from Y");
    residual.array() *= mask->array();
  }
  return residual.norm();
}

double snr_db(const Matrix& Y_true, const Matrix& Y_est, SnrRegion region,
              const Matrix* mask) {
  if (Y_true.rows() != Y_est.rows() || Y_true.cols() != Y_est.cols())
    throw DimensionError("snr_db: shapes differ");
  double signal = 0.0;
  double noise = 0.0;
  if (region == SnrRegion::all) {
    signal = Y_true.squaredNorm();
    noise = (Y_true - Y_est).squaredNorm();
  } else {
    if (!mask) throw ArgumentError("snr_db: missing_only region needs a mask");
    if (mask->rows() != Y_true.rows() || mask->cols() != Y_true.cols())
      throw DimensionError("snr_db: mask shape differs");
    const auto hidden = (1.0 - mask->array());
    signal = (Y_true.array() * hidden).matrix().squaredNorm();
    noise = ((Y_true - Y_est).array() * hidden).matrix().squaredNorm();
  }
  if (signal == 0.0)
    throw NumericalError("snr_db: zero signal power, SNR undefined");
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / noise);
}

}  // namespace omfb
