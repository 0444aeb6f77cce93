#include "omfb/dataio.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include "omfb/rng.hpp"

namespace omfb {

namespace {

std::string location(std::size_t row, std::size_t col) {
  return "row " + std::to_string(row) + ", column " + std::to_string(col);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Parses one cell; NaN is legal and reported through is_nan.
double parse_cell(std::string_view cell, std::size_t row, std::size_t col,
                  bool& is_nan) {
  const std::string_view body = trim(cell);
  if (body.empty())
    throw ParseError("empty cell at " + location(row, col));
  double value = 0.0;
  auto first = body.data();
  auto last = body.data() + body.size();
  if (*first == '+') ++first;  // from_chars rejects a leading plus
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last)
    throw ParseError("unparsable cell '" + std::string(body) + "' at " +
                     location(row, col));
  if (std::isnan(value)) {
    is_nan = true;
    return 0.0;
  }
  if (!std::isfinite(value))
    throw ParseError("non-finite cell at " + location(row, col));
  is_nan = false;
  return value;
}

LoadedMatrix load_csv(const DatasetSpec& spec) {
  std::ifstream in(spec.path);
  if (!in) throw IoError("cannot open: " + spec.path);

  std::vector<std::vector<double>> rows;
  std::vector<std::vector<double>> mask_rows;
  bool saw_nan = false;
  std::size_t n_cols = 0;
  std::string line;
  std::size_t line_no = 0;
  bool skip_header = spec.has_header;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (skip_header) {
      skip_header = false;
      continue;
    }
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;

    std::vector<double> row;
    std::vector<double> mask_row;
    std::size_t start = 0;
    std::size_t cell_no = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string_view cell =
          std::string_view(line).substr(start, comma == std::string::npos
                                                   ? std::string::npos
                                                   : comma - start);
      ++cell_no;
      bool is_nan = false;
      row.push_back(parse_cell(cell, line_no, cell_no, is_nan));
      mask_row.push_back(is_nan ? 0.0 : 1.0);
      saw_nan = saw_nan || is_nan;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (n_cols == 0) {
      n_cols = row.size();
    } else if (row.size() != n_cols) {
      throw ParseError("ragged row at row " + std::to_string(line_no) + ": got " +
                       std::to_string(row.size()) + " cells, expected " +
                       std::to_string(n_cols));
    }
    rows.push_back(std::move(row));
    mask_rows.push_back(std::move(mask_row));
  }
  if (rows.empty()) throw ParseError("empty file: " + spec.path);

  Matrix values(Index(rows.size()), Index(n_cols));
  Matrix mask(Index(rows.size()), Index(n_cols));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < n_cols; ++j) {
      values(Index(i), Index(j)) = rows[i][j];
      mask(Index(i), Index(j)) = mask_rows[i][j];
    }

  LoadedMatrix out;
  out.values = std::move(values);
  if (saw_nan) out.mask = std::move(mask);
  return out;
}

LoadedMatrix load_matrix_market(const DatasetSpec& spec) {
  std::ifstream in(spec.path);
  if (!in) throw IoError("cannot open: " + spec.path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file: " + spec.path);
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
  };
  if (tag != "%%MatrixMarket" || lower(object) != "matrix")
    throw ParseError("not a MatrixMarket file: " + spec.path);
  if (lower(format) != "array")
    throw ParseError("only the dense array format is supported (got '" + format + "')");
  if (lower(field) != "real" && lower(field) != "integer" && lower(field) != "double")
    throw ParseError("unsupported field type '" + field + "'");
  if (lower(symmetry) != "general")
    throw ParseError("only general symmetry is supported (got '" + symmetry + "')");

  std::size_t line_no = 1;
  Index rows = 0, cols = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '%') continue;
    std::istringstream dims{std::string(body)};
    if (!(dims >> rows >> cols) || rows < 1 || cols < 1)
      throw ParseError("bad dimension line at row " + std::to_string(line_no));
    break;
  }
  if (rows == 0) throw ParseError("missing dimension line: " + spec.path);

  Matrix values(rows, cols);
  Matrix mask = Matrix::Ones(rows, cols);
  bool saw_nan = false;
  Index count = 0;
  const Index total = rows * cols;
  while (count < total && std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '%') continue;
    bool is_nan = false;
    const double v = parse_cell(body, line_no, 1, is_nan);
    // array format lists entries column by column
    const Index col = count / rows;
    const Index row = count % rows;
    values(row, col) = v;
    if (is_nan) {
      mask(row, col) = 0.0;
      saw_nan = true;
    }
    ++count;
  }
  if (count != total)
    throw ParseError("expected " + std::to_string(total) + " entries, got " +
                     std::to_string(count));

  LoadedMatrix out;
  out.values = std::move(values);
  if (saw_nan) out.mask = std::move(mask);
  return out;
}

FileFormat infer_format(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot != std::string::npos) {
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == "mtx" || ext == "mm") return FileFormat::matrix_market_dense;
  }
  return FileFormat::csv;
}

}  // namespace

LoadedMatrix load_matrix(const DatasetSpec& spec) {
  FileFormat format = spec.format;
  if (format == FileFormat::infer) format = infer_format(spec.path);
  LoadedMatrix loaded = format == FileFormat::csv ? load_csv(spec)
                                                  : load_matrix_market(spec);
  if (spec.orientation == Orientation::rows_are_instances) {
    loaded.values.transposeInPlace();
    if (loaded.mask) loaded.mask->transposeInPlace();
  }
  return loaded;
}

void save_matrix_csv(const Matrix& M, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  char buf[64];
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", M(i, j));
      if (j) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out.good()) throw IoError("write failed: " + path);
}

Matrix generate_mask(Index m, Index n, double missing_fraction, MaskMode mode,
                     std::uint64_t seed) {
  if (m < 1 || n < 1) throw ArgumentError("generate_mask: shape must be nonempty");
  if (!(missing_fraction >= 0.0) || missing_fraction >= 1.0)
    throw ArgumentError("generate_mask: fraction must lie in [0, 1)");

  Xoshiro256pp rng(seed);
  Matrix mask = Matrix::Ones(m, n);
  if (mode == MaskMode::per_column_exact) {
    const Index hidden = Index(std::llround(missing_fraction * double(m)));
    if (hidden >= m)
      throw ArgumentError("generate_mask: fraction leaves no observed entries per column");
    std::vector<Index> pool(static_cast<std::size_t>(m));
    for (Index j = 0; j < n; ++j) {
      std::iota(pool.begin(), pool.end(), Index{0});
      for (Index i = 0; i < hidden; ++i) {
        const auto pick = i + Index(rng.uniform_below(std::uint64_t(m - i)));
        std::swap(pool[std::size_t(i)], pool[std::size_t(pick)]);
        mask(pool[std::size_t(i)], j) = 0.0;
      }
    }
  } else {
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < m; ++i)
        if (rng.uniform01() < missing_fraction) mask(i, j) = 0.0;
  }
  return mask;
}

void export_image_grid(const Matrix& M, Index image_height, Index image_width,
                       Index grid_cols, const std::string& path) {
  if (image_height < 1 || image_width < 1 || grid_cols < 1)
    throw ArgumentError("export_image_grid: dimensions must be positive");
  if (image_height * image_width != M.rows())
    throw ArgumentError("export_image_grid: image_height*image_width must equal row count");

  const Index n = M.cols();
  const Index grid_rows = (n + grid_cols - 1) / grid_cols;
  const Index canvas_h = grid_rows * image_height;
  const Index canvas_w = grid_cols * image_width;

  const double lo = M.minCoeff();
  const double hi = M.maxCoeff();
  const double range = hi - lo;

  std::vector<unsigned char> pixels(std::size_t(canvas_h) * std::size_t(canvas_w), 0);
  for (Index k = 0; k < n; ++k) {
    const Index cell_row = k / grid_cols;
    const Index cell_col = k % grid_cols;
    for (Index j = 0; j < image_width; ++j)
      for (Index i = 0; i < image_height; ++i) {
        const double v = M(j * image_height + i, k);  // column-major pixels
        const double norm = range > 0.0 ? (v - lo) / range : 0.0;
        const long byte = std::lround(255.0 * std::clamp(norm, 0.0, 1.0));
        const Index row = cell_row * image_height + i;
        const Index col = cell_col * image_width + j;
        pixels[std::size_t(row) * std::size_t(canvas_w) + std::size_t(col)] =
            static_cast<unsigned char>(byte);
      }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "P5\n" << canvas_w << ' ' << canvas_h << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            std::streamsize(pixels.size()));
  if (!out.good()) throw IoError("write failed: " + path);
}

std::string file_fingerprint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::uint64_t hash = 14695981039346656037ULL;
  char chunk[8192];
  while (in.read(chunk, sizeof chunk) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(chunk[i]);
      hash *= 1099511628211ULL;
    }
    if (!in) break;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace omfb
