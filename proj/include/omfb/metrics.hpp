#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "omfb/matrix.hpp"

namespace omfb {

/// One point on a benchmark curve.
struct TraceRecord {
  std::int64_t samples = 0;  // column observations consumed so far
  double seconds = 0.0;      // wall-clock spent in update computations
  double error = 0.0;        // Frobenius reconstruction error
};

/// Append-only trace; samples and seconds must be nondecreasing.
class Trace {
 public:
  void record(std::int64_t samples, double seconds, double error);
  const std::vector<TraceRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const TraceRecord& back() const { return records_.back(); }

  /// CSV with header `samples,seconds,frobenius_error`, 17 significant
  /// digits, newline-terminated.
  void write_csv(std::ostream& out) const;
  void write_csv(const std::string& path) const;

 private:
  std::vector<TraceRecord> records_;
};

/// ||Y - C X||_F, restricted to entries with mask 1 when a mask is given.
double reconstruction_error(const Matrix& Y, const Matrix& C, const Matrix& X,
                            const Matrix* mask = nullptr);

enum class SnrRegion { all, missing_only };

/// 10 log10(||Y_true||_F^2 / ||Y_true - Y_est||_F^2) over the chosen region;
/// missing_only restricts to entries with mask 0. Returns +infinity when the
/// error vanishes; throws NumericalError when the signal power is zero.
double snr_db(const Matrix& Y_true, const Matrix& Y_est,
              SnrRegion region = SnrRegion::all, const Matrix* mask = nullptr);

}  // namespace omfb
