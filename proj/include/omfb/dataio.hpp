#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "omfb/matrix.hpp"

namespace omfb {

enum class FileFormat { infer, csv, matrix_market_dense };
enum class Orientation { columns_are_instances, rows_are_instances };
enum class MaskMode { per_column_exact, global_bernoulli };

struct DatasetSpec {
  std::string path;
  FileFormat format = FileFormat::infer;  // by extension: .mtx, else CSV
  Orientation orientation = Orientation::columns_are_instances;
  bool has_header = false;  // CSV only
};

/// Loaded values plus a mask when the file carried NaN cells
/// (NaN becomes value 0, mask 0).
struct LoadedMatrix {
  Matrix values;
  std::optional<Matrix> mask;
};

LoadedMatrix load_matrix(const DatasetSpec& spec);

/// CSV with 17 significant digits per cell; load/save round-trips bitwise.
void save_matrix_csv(const Matrix& M, const std::string& path);

/// Binary mask with the given fraction of entries hidden (0 = missing).
/// per_column_exact hides exactly round(fraction * m) entries per column;
/// global_bernoulli hides each entry independently.
Matrix generate_mask(Index m, Index n, double missing_fraction, MaskMode mode,
                     std::uint64_t seed);

/// Binary PGM (P5, maxval 255) tiling columns of M as image_height x
/// image_width images, grid_cols per row, min-max normalized over the whole
/// matrix; a constant matrix maps to all-zero pixels.
void export_image_grid(const Matrix& M, Index image_height, Index image_width,
                       Index grid_cols, const std::string& path);

/// FNV-1a 64 over a file's bytes, as a hex string; manifest fingerprint.
std::string file_fingerprint(const std::string& path);

}  // namespace omfb
