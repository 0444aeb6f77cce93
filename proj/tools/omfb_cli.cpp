// omfb: command-line front end for online matrix factorization runs.
//
// Subcommands: factorize, impute, benchmark, nmf, rerun. Every run writes a
// flat key=value manifest next to its outputs; `rerun --manifest FILE`
// re-executes the stored configuration and reproduces the numeric outputs.
// Exit codes: 0 success, 2 argument error, 3 I/O error, 4 numerical failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <limits>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "omfb/baselines.hpp"
#include "omfb/dataio.hpp"
#include "omfb/matrix.hpp"
#include "omfb/metrics.hpp"
#include "omfb/minibatch.hpp"
#include "omfb/missing.hpp"
#include "omfb/omfb.hpp"

namespace fs = std::filesystem;

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string timestamp_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------
// Manifest: ordered key=value pairs.

class Manifest {
 public:
  void set(const std::string& key, const std::string& value) {
    for (auto& kv : entries_)
      if (kv.first == key) {
        kv.second = value;
        return;
      }
    entries_.emplace_back(key, value);
  }
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }
  void set(const std::string& key, double v) { set(key, fmt_double(v)); }
  void set(const std::string& key, std::int64_t v) { set(key, std::to_string(v)); }
  void set(const std::string& key, std::uint64_t v) { set(key, std::to_string(v)); }
  void set(const std::string& key, int v) { set(key, std::to_string(v)); }
  void set(const std::string& key, bool v) { set(key, v ? std::string("true") : std::string("false")); }

  bool has(const std::string& key) const {
    for (const auto& kv : entries_)
      if (kv.first == key) return true;
    return false;
  }
  std::string get(const std::string& key) const {
    for (const auto& kv : entries_)
      if (kv.first == key) return kv.second;
    throw omfb::ArgumentError("manifest: missing key '" + key + "'");
  }
  std::string get_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? get(key) : fallback;
  }
  double get_double(const std::string& key) const {
    try {
      return std::stod(get(key));
    } catch (const std::logic_error&) {
      throw omfb::ArgumentError("manifest: key '" + key + "' is not a number");
    }
  }
  int get_int(const std::string& key) const {
    try {
      return std::stoi(get(key));
    } catch (const std::logic_error&) {
      throw omfb::ArgumentError("manifest: key '" + key + "' is not an integer");
    }
  }
  std::uint64_t get_u64(const std::string& key) const {
    try {
      return std::stoull(get(key));
    } catch (const std::logic_error&) {
      throw omfb::ArgumentError("manifest: key '" + key + "' is not an integer");
    }
  }
  bool get_bool(const std::string& key) const { return get(key) == "true"; }

  void write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw omfb::IoError("cannot open for writing: " + path);
    for (const auto& kv : entries_) out << kv.first << '=' << kv.second << '\n';
    if (!out.good()) throw omfb::IoError("write failed: " + path);
  }

  static Manifest read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw omfb::IoError("cannot open: " + path);
    Manifest mf;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw omfb::ParseError("manifest: malformed line '" + line + "'");
      mf.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return mf;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// ---------------------------------------------------------------------------
// Shared option blocks.

struct DataOptions {
  std::string dataset;
  std::string format = "infer";        // infer|csv|mtx
  std::string orientation = "columns"; // columns|rows
  bool header = false;
  std::string out = "omfb_out";
};

omfb::DatasetSpec to_spec(const DataOptions& d) {
  omfb::DatasetSpec spec;
  spec.path = d.dataset;
  if (d.format == "infer")
    spec.format = omfb::FileFormat::infer;
  else if (d.format == "csv")
    spec.format = omfb::FileFormat::csv;
  else if (d.format == "mtx")
    spec.format = omfb::FileFormat::matrix_market_dense;
  else
    throw omfb::ArgumentError("unknown format '" + d.format + "'");
  if (d.orientation == "columns")
    spec.orientation = omfb::Orientation::columns_are_instances;
  else if (d.orientation == "rows")
    spec.orientation = omfb::Orientation::rows_are_instances;
  else
    throw omfb::ArgumentError("unknown orientation '" + d.orientation + "'");
  spec.has_header = d.header;
  return spec;
}

omfb::Sampling parse_sampling(const std::string& s) {
  if (s == "uniform") return omfb::Sampling::uniform_random;
  if (s == "sequential") return omfb::Sampling::sequential;
  throw omfb::ArgumentError("unknown sampling mode '" + s + "'");
}

omfb::BatchSolver parse_batch_solver(const std::string& s) {
  if (s == "direct") return omfb::BatchSolver::direct;
  if (s == "woodbury") return omfb::BatchSolver::woodbury;
  throw omfb::ArgumentError("unknown batch solver '" + s + "'");
}

void add_data_flags(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("dataset", d.dataset, "dataset file (CSV or MatrixMarket array)")
      ->required();
  cmd->add_option("--format", d.format, "infer|csv|mtx")->capture_default_str();
  cmd->add_option("--orientation", d.orientation,
                  "columns|rows (instances as columns or rows)")
      ->capture_default_str();
  cmd->add_flag("--csv-header", d.header, "skip the first CSV line");
  cmd->add_option("-o,--out", d.out, "output directory")->capture_default_str();
}

void set_data_manifest(Manifest& mf, const DataOptions& d) {
  mf.set("dataset", fs::absolute(d.dataset).string());
  mf.set("format", d.format);
  mf.set("orientation", d.orientation);
  mf.set("header", d.header);
  mf.set("dataset_fnv1a64", omfb::file_fingerprint(d.dataset));
}

DataOptions data_from_manifest(const Manifest& mf, const std::string& out) {
  DataOptions d;
  d.dataset = mf.get("dataset");
  d.format = mf.get_or("format", "infer");
  d.orientation = mf.get_or("orientation", "columns");
  d.header = mf.get_bool("header");
  d.out = out;
  return d;
}

omfb::LoadedMatrix load_dataset(const DataOptions& d) {
  return omfb::load_matrix(to_spec(d));
}

fs::path prepare_out_dir(const DataOptions& d) {
  fs::path dir(d.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw omfb::IoError("cannot create output directory: " + d.out);
  return dir;
}

// SNR of the fit over observed entries only; reporting helper for runs
// without held-out ground truth.
double observed_fit_snr(const omfb::Matrix& Y, const omfb::Matrix& approx,
                        const omfb::Matrix& mask) {
  const double signal = (mask.array() * Y.array()).matrix().squaredNorm();
  const double noise = (mask.array() * (Y - approx).array()).matrix().squaredNorm();
  if (signal == 0.0) throw omfb::NumericalError("SNR undefined: zero signal power");
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / noise);
}

// ---------------------------------------------------------------------------
// factorize

struct FactorizeOptions {
  DataOptions data;
  int rank = 30;
  double lambda = 10.0;
  int inner_iters = 2;
  int epochs = 30;
  std::int64_t batch_size = 1;
  std::string sampling = "uniform";
  std::uint64_t seed = 0;
  double ridge_eps = 1e-10;
  std::string batch_solver = "direct";
  bool early_stop = false;
};

omfb::OmfbConfig to_config(const FactorizeOptions& o) {
  omfb::OmfbConfig cfg;
  cfg.rank = o.rank;
  cfg.lambda = o.lambda;
  cfg.inner_iters = o.inner_iters;
  cfg.epochs = o.epochs;
  cfg.sampling = parse_sampling(o.sampling);
  cfg.seed = o.seed;
  cfg.ridge_eps = o.ridge_eps;
  cfg.batch_solver = parse_batch_solver(o.batch_solver);
  cfg.early_stop = o.early_stop;
  cfg.validate();
  return cfg;
}

void run_factorize(const FactorizeOptions& o) {
  Manifest mf;
  mf.set("command", "factorize");
  set_data_manifest(mf, o.data);
  mf.set("rank", o.rank);
  mf.set("lambda", o.lambda);
  mf.set("inner_iters", o.inner_iters);
  mf.set("epochs", o.epochs);
  mf.set("batch_size", std::int64_t(o.batch_size));
  mf.set("sampling", o.sampling);
  mf.set("seed", o.seed);
  mf.set("ridge_eps", o.ridge_eps);
  mf.set("batch_solver", o.batch_solver);
  mf.set("early_stop", o.early_stop);
  mf.set("started_at", timestamp_utc());

  const auto loaded = load_dataset(o.data);
  if (loaded.mask)
    throw omfb::ArgumentError("dataset has missing entries; use the impute command");
  const omfb::OmfbConfig cfg = to_config(o);

  const fs::path dir = prepare_out_dir(o.data);
  omfb::Trace trace;
  omfb::FactorState state =
      o.batch_size == 1
          ? omfb::omfb_run(loaded.values, cfg, trace)
          : omfb::minibatch_run(loaded.values, omfb::Index(o.batch_size), cfg, trace);

  const auto dict_path = dir / "dictionary.csv";
  const auto coef_path = dir / "coefficients.csv";
  const auto trace_path = dir / "trace.csv";
  omfb::save_matrix_csv(state.dictionary, dict_path.string());
  omfb::save_matrix_csv(state.coefficients, coef_path.string());
  trace.write_csv(trace_path.string());

  mf.set("finished_at", timestamp_utc());
  mf.set("output.dictionary", dict_path.string());
  mf.set("output.coefficients", coef_path.string());
  mf.set("output.trace", trace_path.string());
  mf.write((dir / "manifest.txt").string());
}

FactorizeOptions factorize_from_manifest(const Manifest& mf, const std::string& out) {
  FactorizeOptions o;
  o.data = data_from_manifest(mf, out);
  o.rank = mf.get_int("rank");
  o.lambda = mf.get_double("lambda");
  o.inner_iters = mf.get_int("inner_iters");
  o.epochs = mf.get_int("epochs");
  o.batch_size = mf.get_int("batch_size");
  o.sampling = mf.get("sampling");
  o.seed = mf.get_u64("seed");
  o.ridge_eps = mf.get_double("ridge_eps");
  o.batch_solver = mf.get_or("batch_solver", "direct");
  o.early_stop = mf.get_bool("early_stop");
  return o;
}

// ---------------------------------------------------------------------------
// impute

struct ImputeOptions {
  DataOptions data;
  int rank = 30;
  double lambda = 2.0;
  int inner_iters = 2;
  int epochs = 30;
  std::string sampling = "uniform";
  std::uint64_t seed = 0;
  double ridge_eps = 1e-10;
  std::string mask_file;
  double hide_fraction = -1.0;  // < 0 means unset
  std::uint64_t mask_seed = 0;
  bool export_grid = false;
  std::int64_t image_height = 64;
  std::int64_t image_width = 64;
  std::int64_t grid_cols = 20;
};

void run_impute(const ImputeOptions& o) {
  Manifest mf;
  mf.set("command", "impute");
  set_data_manifest(mf, o.data);
  mf.set("rank", o.rank);
  mf.set("lambda", o.lambda);
  mf.set("inner_iters", o.inner_iters);
  mf.set("epochs", o.epochs);
  mf.set("sampling", o.sampling);
  mf.set("seed", o.seed);
  mf.set("ridge_eps", o.ridge_eps);
  mf.set("mask_file", o.mask_file);
  mf.set("hide_fraction", o.hide_fraction);
  mf.set("mask_seed", o.mask_seed);
  mf.set("export_grid", o.export_grid);
  mf.set("image_height", std::int64_t(o.image_height));
  mf.set("image_width", std::int64_t(o.image_width));
  mf.set("grid_cols", std::int64_t(o.grid_cols));
  mf.set("started_at", timestamp_utc());

  const auto loaded = load_dataset(o.data);
  const bool hide_requested = o.hide_fraction >= 0.0;

  int mask_sources = 0;
  mask_sources += loaded.mask.has_value() ? 1 : 0;
  mask_sources += o.mask_file.empty() ? 0 : 1;
  mask_sources += hide_requested ? 1 : 0;
  if (mask_sources == 0)
    throw omfb::ArgumentError(
        "no mask: dataset has no NaN cells and neither --mask-file nor --hide-fraction given");
  if (mask_sources > 1)
    throw omfb::ArgumentError("conflicting mask sources; give exactly one of "
                              "NaN cells, --mask-file, --hide-fraction");

  omfb::Matrix M;
  omfb::Matrix Y_obs;
  std::optional<omfb::Matrix> truth;
  if (hide_requested) {
    truth = loaded.values;
    M = omfb::generate_mask(truth->rows(), truth->cols(), o.hide_fraction,
                            omfb::MaskMode::per_column_exact, o.mask_seed);
    Y_obs = (M.array() * truth->array()).matrix();
  } else if (!o.mask_file.empty()) {
    omfb::DatasetSpec mask_spec;
    mask_spec.path = o.mask_file;
    const auto mask_loaded = omfb::load_matrix(mask_spec);
    if (mask_loaded.mask)
      throw omfb::ArgumentError("mask file contains NaN cells");
    M = mask_loaded.values;
    for (omfb::Index j = 0; j < M.cols(); ++j)
      for (omfb::Index i = 0; i < M.rows(); ++i)
        if (M(i, j) != 0.0 && M(i, j) != 1.0)
          throw omfb::ArgumentError("mask file entries must be 0 or 1");
    Y_obs = (M.array() * loaded.values.array()).matrix();
  } else {
    M = *loaded.mask;
    Y_obs = loaded.values;  // NaN cells already hold 0
  }

  omfb::OmfbConfig cfg;
  cfg.rank = o.rank;
  cfg.lambda = o.lambda;
  cfg.inner_iters = o.inner_iters;
  cfg.epochs = o.epochs;
  cfg.sampling = parse_sampling(o.sampling);
  cfg.seed = o.seed;
  cfg.ridge_eps = o.ridge_eps;
  cfg.validate();

  const fs::path dir = prepare_out_dir(o.data);
  omfb::Trace trace;
  std::size_t skipped = 0;
  const omfb::FactorState state =
      omfb::omfb_missing_run(Y_obs, M, cfg, trace, nullptr, nullptr, &skipped);
  const omfb::Matrix imputed = omfb::impute(state, M, Y_obs);

  const auto imputed_path = dir / "imputed.csv";
  const auto trace_path = dir / "trace.csv";
  const auto snr_path = dir / "snr.txt";
  omfb::save_matrix_csv(imputed, imputed_path.string());
  trace.write_csv(trace_path.string());

  {
    std::ofstream snr(snr_path);
    if (!snr) throw omfb::IoError("cannot open for writing: " + snr_path.string());
    if (truth) {
      const bool any_hidden = M.sum() < double(M.size());
      snr << "snr_overall_db=" << fmt_double(omfb::snr_db(*truth, imputed)) << '\n';
      if (any_hidden) {
        snr << "snr_missing_db="
            << fmt_double(omfb::snr_db(*truth, imputed, omfb::SnrRegion::missing_only, &M))
            << '\n';
        snr << "snr_missing_zero_fill_db="
            << fmt_double(omfb::snr_db(*truth, Y_obs, omfb::SnrRegion::missing_only, &M))
            << '\n';
      } else {
        snr << "snr_missing_db=unavailable\n";
      }
    } else {
      const omfb::Matrix approx = state.dictionary * state.coefficients;
      snr << "snr_observed_db=" << fmt_double(observed_fit_snr(Y_obs, approx, M)) << '\n';
      snr << "snr_missing_db=unavailable\n";
    }
    if (!snr.good()) throw omfb::IoError("write failed: " + snr_path.string());
  }

  if (o.export_grid) {
    omfb::export_image_grid(Y_obs, o.image_height, o.image_width, o.grid_cols,
                            (dir / "observed.pgm").string());
    omfb::export_image_grid(imputed, o.image_height, o.image_width, o.grid_cols,
                            (dir / "imputed.pgm").string());
  }

  mf.set("skipped_columns", std::int64_t(skipped));
  mf.set("finished_at", timestamp_utc());
  mf.set("output.imputed", imputed_path.string());
  mf.set("output.trace", trace_path.string());
  mf.set("output.snr", snr_path.string());
  mf.write((dir / "manifest.txt").string());
}

ImputeOptions impute_from_manifest(const Manifest& mf, const std::string& out) {
  ImputeOptions o;
  o.data = data_from_manifest(mf, out);
  o.rank = mf.get_int("rank");
  o.lambda = mf.get_double("lambda");
  o.inner_iters = mf.get_int("inner_iters");
  o.epochs = mf.get_int("epochs");
  o.sampling = mf.get("sampling");
  o.seed = mf.get_u64("seed");
  o.ridge_eps = mf.get_double("ridge_eps");
  o.mask_file = mf.get("mask_file");
  o.hide_fraction = mf.get_double("hide_fraction");
  o.mask_seed = mf.get_u64("mask_seed");
  o.export_grid = mf.get_bool("export_grid");
  o.image_height = mf.get_int("image_height");
  o.image_width = mf.get_int("image_width");
  o.grid_cols = mf.get_int("grid_cols");
  return o;
}

// ---------------------------------------------------------------------------
// benchmark

struct BenchmarkOptions {
  DataOptions data;
  std::string algorithms = "omfb,sgmf";
  int rank = 30;
  double lambda = 10.0;
  int inner_iters = 2;
  int epochs = 30;
  std::int64_t batch_size = 10;
  std::string sampling = "uniform";
  std::uint64_t seed = 0;
  double ridge_eps = 1e-10;
  double sgmf_alpha = 0.1;
  double sgmf_beta = 0.6;
};

std::vector<std::string> parse_algorithms(const std::string& list) {
  std::vector<std::string> arms;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item != "omfb" && item != "sgmf")
      throw omfb::ArgumentError("unknown algorithm '" + item + "' (expected omfb|sgmf)");
    if (std::find(arms.begin(), arms.end(), item) == arms.end()) arms.push_back(item);
  }
  if (arms.empty()) throw omfb::ArgumentError("no algorithms requested");
  return arms;
}

void run_benchmark(const BenchmarkOptions& o) {
  Manifest mf;
  mf.set("command", "benchmark");
  set_data_manifest(mf, o.data);
  mf.set("algorithms", o.algorithms);
  mf.set("rank", o.rank);
  mf.set("lambda", o.lambda);
  mf.set("inner_iters", o.inner_iters);
  mf.set("epochs", o.epochs);
  mf.set("batch_size", std::int64_t(o.batch_size));
  mf.set("sampling", o.sampling);
  mf.set("seed", o.seed);
  mf.set("ridge_eps", o.ridge_eps);
  mf.set("sgmf_alpha", o.sgmf_alpha);
  mf.set("sgmf_beta", o.sgmf_beta);
  mf.set("started_at", timestamp_utc());

  const auto arms = parse_algorithms(o.algorithms);
  const auto loaded = load_dataset(o.data);
  if (loaded.mask)
    throw omfb::ArgumentError("dataset has missing entries; use the impute command");
  const omfb::Matrix& Y = loaded.values;

  const fs::path dir = prepare_out_dir(o.data);
  std::map<std::string, omfb::Trace> traces;
  for (const auto& arm : arms) {
    omfb::Trace trace;
    if (arm == "omfb") {
      omfb::OmfbConfig cfg;
      cfg.rank = o.rank;
      cfg.lambda = o.lambda;
      cfg.inner_iters = o.inner_iters;
      cfg.epochs = o.epochs;
      cfg.sampling = parse_sampling(o.sampling);
      cfg.seed = o.seed;
      cfg.ridge_eps = o.ridge_eps;
      cfg.validate();
      if (o.batch_size == 1)
        omfb::omfb_run(Y, cfg, trace);
      else
        omfb::minibatch_run(Y, omfb::Index(o.batch_size), cfg, trace);
    } else {
      const omfb::StepSchedule schedule(o.sgmf_alpha, o.sgmf_beta);
      omfb::sgmf_run(Y, o.rank, schedule, schedule, o.epochs,
                     omfb::Index(o.batch_size), o.seed, trace,
                     omfb::HStepMode::shared, parse_sampling(o.sampling));
    }
    trace.write_csv((dir / ("trace_" + arm + ".csv")).string());
    mf.set("output.trace_" + arm, (dir / ("trace_" + arm + ".csv")).string());
    traces.emplace(arm, std::move(trace));
  }

  // merged comparison keyed by samples_processed
  const auto merged_path = dir / "comparison.csv";
  {
    std::ofstream out(merged_path);
    if (!out) throw omfb::IoError("cannot open for writing: " + merged_path.string());
    out << "samples";
    for (const auto& arm : arms) out << ',' << arm << "_error";
    out << '\n';
    std::size_t rows = traces.at(arms.front()).size();
    for (const auto& arm : arms) rows = std::min(rows, traces.at(arm).size());
    for (std::size_t i = 0; i < rows; ++i) {
      const auto samples = traces.at(arms.front()).records()[i].samples;
      for (const auto& arm : arms)
        if (traces.at(arm).records()[i].samples != samples)
          throw omfb::NumericalError("benchmark arms disagree on trace cadence");
      out << samples;
      for (const auto& arm : arms)
        out << ',' << fmt_double(traces.at(arm).records()[i].error);
      out << '\n';
    }
    if (!out.good()) throw omfb::IoError("write failed: " + merged_path.string());
  }

  mf.set("finished_at", timestamp_utc());
  mf.set("output.comparison", merged_path.string());
  mf.write((dir / "manifest.txt").string());
}

BenchmarkOptions benchmark_from_manifest(const Manifest& mf, const std::string& out) {
  BenchmarkOptions o;
  o.data = data_from_manifest(mf, out);
  o.algorithms = mf.get("algorithms");
  o.rank = mf.get_int("rank");
  o.lambda = mf.get_double("lambda");
  o.inner_iters = mf.get_int("inner_iters");
  o.epochs = mf.get_int("epochs");
  o.batch_size = mf.get_int("batch_size");
  o.sampling = mf.get("sampling");
  o.seed = mf.get_u64("seed");
  o.ridge_eps = mf.get_double("ridge_eps");
  o.sgmf_alpha = mf.get_double("sgmf_alpha");
  o.sgmf_beta = mf.get_double("sgmf_beta");
  return o;
}

// ---------------------------------------------------------------------------
// nmf

struct NmfOptions {
  DataOptions data;
  int rank = 30;
  int iterations = 1000;
  std::uint64_t seed = 0;
  std::string mask_file;
  double hide_fraction = -1.0;
  std::uint64_t mask_seed = 0;
};

void run_nmf(const NmfOptions& o) {
  Manifest mf;
  mf.set("command", "nmf");
  set_data_manifest(mf, o.data);
  mf.set("rank", o.rank);
  mf.set("iterations", o.iterations);
  mf.set("seed", o.seed);
  mf.set("mask_file", o.mask_file);
  mf.set("hide_fraction", o.hide_fraction);
  mf.set("mask_seed", o.mask_seed);
  mf.set("started_at", timestamp_utc());

  const auto loaded = load_dataset(o.data);
  const bool hide_requested = o.hide_fraction >= 0.0;
  int mask_sources = (loaded.mask ? 1 : 0) + (o.mask_file.empty() ? 0 : 1) +
                     (hide_requested ? 1 : 0);
  if (mask_sources > 1)
    throw omfb::ArgumentError("conflicting mask sources; give at most one of "
                              "NaN cells, --mask-file, --hide-fraction");

  omfb::Matrix Y = loaded.values;
  std::optional<omfb::Matrix> mask;
  std::optional<omfb::Matrix> truth;
  if (hide_requested) {
    truth = Y;
    mask = omfb::generate_mask(Y.rows(), Y.cols(), o.hide_fraction,
                               omfb::MaskMode::per_column_exact, o.mask_seed);
    Y = (mask->array() * Y.array()).matrix();
  } else if (!o.mask_file.empty()) {
    omfb::DatasetSpec mask_spec;
    mask_spec.path = o.mask_file;
    const auto mask_loaded = omfb::load_matrix(mask_spec);
    if (mask_loaded.mask)
      throw omfb::ArgumentError("mask file contains NaN cells");
    mask = mask_loaded.values;
    for (omfb::Index j = 0; j < mask->cols(); ++j)
      for (omfb::Index i = 0; i < mask->rows(); ++i)
        if ((*mask)(i, j) != 0.0 && (*mask)(i, j) != 1.0)
          throw omfb::ArgumentError("mask file entries must be 0 or 1");
    Y = (mask->array() * Y.array()).matrix();
  } else if (loaded.mask) {
    mask = *loaded.mask;
  }

  const fs::path dir = prepare_out_dir(o.data);
  const auto factors =
      omfb::nmf_run(Y, o.rank, o.iterations, o.seed, mask ? &*mask : nullptr);
  const omfb::Matrix approx = factors.first * factors.second;

  const auto w_path = dir / "w.csv";
  const auto h_path = dir / "h.csv";
  const auto snr_path = dir / "snr.txt";
  omfb::save_matrix_csv(factors.first, w_path.string());
  omfb::save_matrix_csv(factors.second, h_path.string());

  {
    std::ofstream snr(snr_path);
    if (!snr) throw omfb::IoError("cannot open for writing: " + snr_path.string());
    if (truth) {
      const omfb::Matrix imputed =
          (mask->array() * truth->array() + (1.0 - mask->array()) * approx.array())
              .matrix();
      snr << "snr_overall_db=" << fmt_double(omfb::snr_db(*truth, imputed)) << '\n';
      if (mask->sum() < double(mask->size()))
        snr << "snr_missing_db="
            << fmt_double(omfb::snr_db(*truth, imputed, omfb::SnrRegion::missing_only,
                                       &*mask))
            << '\n';
      else
        snr << "snr_missing_db=unavailable\n";
    } else if (mask) {
      snr << "snr_observed_db=" << fmt_double(observed_fit_snr(Y, approx, *mask)) << '\n';
      snr << "snr_missing_db=unavailable\n";
    } else {
      snr << "snr_overall_db=" << fmt_double(omfb::snr_db(Y, approx)) << '\n';
    }
    if (!snr.good()) throw omfb::IoError("write failed: " + snr_path.string());
  }

  mf.set("finished_at", timestamp_utc());
  mf.set("output.w", w_path.string());
  mf.set("output.h", h_path.string());
  mf.set("output.snr", snr_path.string());
  mf.write((dir / "manifest.txt").string());
}

NmfOptions nmf_from_manifest(const Manifest& mf, const std::string& out) {
  NmfOptions o;
  o.data = data_from_manifest(mf, out);
  o.rank = mf.get_int("rank");
  o.iterations = mf.get_int("iterations");
  o.seed = mf.get_u64("seed");
  o.mask_file = mf.get("mask_file");
  o.hide_fraction = mf.get_double("hide_fraction");
  o.mask_seed = mf.get_u64("mask_seed");
  return o;
}

// ---------------------------------------------------------------------------
// rerun

void run_rerun(const std::string& manifest_path, std::string out) {
  const Manifest mf = Manifest::read(manifest_path);
  const std::string command = mf.get("command");
  if (out.empty())
    out = fs::path(manifest_path).parent_path().string() + "_rerun";

  if (mf.has("dataset") && mf.has("dataset_fnv1a64")) {
    const std::string current = omfb::file_fingerprint(mf.get("dataset"));
    if (current != mf.get("dataset_fnv1a64"))
      std::cerr << "warning: dataset fingerprint changed since the recorded run\n";
  }

  if (command == "factorize")
    run_factorize(factorize_from_manifest(mf, out));
  else if (command == "impute")
    run_impute(impute_from_manifest(mf, out));
  else if (command == "benchmark")
    run_benchmark(benchmark_from_manifest(mf, out));
  else if (command == "nmf")
    run_nmf(nmf_from_manifest(mf, out));
  else
    throw omfb::ArgumentError("manifest names unknown command '" + command + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"online matrix factorization via rank-one dictionary updates"};
  app.require_subcommand(1);

  FactorizeOptions fo;
  auto* factorize = app.add_subcommand(
      "factorize", "factor a fully observed matrix into dictionary and coefficients");
  add_data_flags(factorize, fo.data);
  factorize->add_option("--rank", fo.rank, "approximation rank")->capture_default_str();
  factorize->add_option("--lambda", fo.lambda, "dictionary drift penalty")
      ->capture_default_str();
  factorize->add_option("--inner-iters", fo.inner_iters, "alternations per step")
      ->capture_default_str();
  factorize->add_option("--epochs", fo.epochs, "passes over the data")
      ->capture_default_str();
  factorize->add_option("--batch-size", fo.batch_size, "columns per step")
      ->capture_default_str();
  factorize->add_option("--sampling", fo.sampling, "uniform|sequential")
      ->capture_default_str();
  factorize->add_option("--seed", fo.seed, "run seed")->capture_default_str();
  factorize->add_option("--ridge-eps", fo.ridge_eps, "ridge for degenerate solves")
      ->capture_default_str();
  factorize->add_option("--batch-solver", fo.batch_solver, "direct|woodbury")
      ->capture_default_str();
  factorize->add_flag("--early-stop", fo.early_stop,
                      "stop when the epoch error improvement drops below 1e-6 relative");

  ImputeOptions io;
  auto* impute = app.add_subcommand("impute", "factor partially observed data and fill it in");
  add_data_flags(impute, io.data);
  impute->add_option("--rank", io.rank, "approximation rank")->capture_default_str();
  impute->add_option("--lambda", io.lambda, "dictionary drift penalty")
      ->capture_default_str();
  impute->add_option("--inner-iters", io.inner_iters, "alternations per step")
      ->capture_default_str();
  impute->add_option("--epochs", io.epochs, "passes over the data")->capture_default_str();
  impute->add_option("--sampling", io.sampling, "uniform|sequential")
      ->capture_default_str();
  impute->add_option("--seed", io.seed, "run seed")->capture_default_str();
  impute->add_option("--ridge-eps", io.ridge_eps, "ridge for degenerate solves")
      ->capture_default_str();
  auto* mask_file_opt =
      impute->add_option("--mask-file", io.mask_file, "binary mask CSV (0 = missing)");
  auto* hide_opt = impute->add_option(
      "--hide-fraction", io.hide_fraction,
      "hide this fraction of each column (keeps ground truth for SNR)");
  impute->add_option("--mask-seed", io.mask_seed, "seed for --hide-fraction")
      ->capture_default_str();
  mask_file_opt->excludes(hide_opt);
  impute->add_flag("--export-grid", io.export_grid, "write observed/imputed PGM grids");
  impute->add_option("--image-height", io.image_height, "pixels per image column")
      ->capture_default_str();
  impute->add_option("--image-width", io.image_width, "pixels per image row")
      ->capture_default_str();
  impute->add_option("--grid-cols", io.grid_cols, "images per grid row")
      ->capture_default_str();

  BenchmarkOptions bo;
  auto* benchmark =
      app.add_subcommand("benchmark", "run factorization arms on one column stream");
  add_data_flags(benchmark, bo.data);
  benchmark->add_option("--algorithms", bo.algorithms, "comma list from {omfb,sgmf}")
      ->capture_default_str();
  benchmark->add_option("--rank", bo.rank, "approximation rank")->capture_default_str();
  benchmark->add_option("--lambda", bo.lambda, "dictionary drift penalty")
      ->capture_default_str();
  benchmark->add_option("--inner-iters", bo.inner_iters, "alternations per step")
      ->capture_default_str();
  benchmark->add_option("--epochs", bo.epochs, "passes over the data")
      ->capture_default_str();
  benchmark->add_option("--batch-size", bo.batch_size, "columns per step")
      ->capture_default_str();
  benchmark->add_option("--sampling", bo.sampling, "uniform|sequential")
      ->capture_default_str();
  benchmark->add_option("--seed", bo.seed, "shared run seed")->capture_default_str();
  benchmark->add_option("--ridge-eps", bo.ridge_eps, "ridge for degenerate solves")
      ->capture_default_str();
  benchmark->add_option("--alpha,--sgmf-alpha", bo.sgmf_alpha, "SGMF step scale")
      ->capture_default_str();
  benchmark->add_option("--beta,--sgmf-beta", bo.sgmf_beta, "SGMF step decay in (0.5,1]")
      ->capture_default_str();

  NmfOptions no;
  auto* nmf = app.add_subcommand("nmf", "batch multiplicative-update factorization");
  add_data_flags(nmf, no.data);
  nmf->add_option("--rank", no.rank, "approximation rank")->capture_default_str();
  nmf->add_option("--iterations", no.iterations, "multiplicative update sweeps")
      ->capture_default_str();
  nmf->add_option("--seed", no.seed, "initialization seed")->capture_default_str();
  auto* nmf_mask_opt =
      nmf->add_option("--mask-file", no.mask_file, "binary mask CSV (0 = missing)");
  auto* nmf_hide_opt = nmf->add_option("--hide-fraction", no.hide_fraction,
                                       "hide this fraction of each column");
  nmf->add_option("--mask-seed", no.mask_seed, "seed for --hide-fraction")
      ->capture_default_str();
  nmf_mask_opt->excludes(nmf_hide_opt);

  std::string rr_manifest;
  std::string rr_out;
  auto* rerun = app.add_subcommand("rerun", "re-execute a recorded run from its manifest");
  rerun->add_option("--manifest", rr_manifest, "manifest file of the recorded run")
      ->required();
  rerun->add_option("-o,--out", rr_out, "output directory (default: <recorded>_rerun)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (factorize->parsed()) run_factorize(fo);
    if (impute->parsed()) run_impute(io);
    if (benchmark->parsed()) run_benchmark(bo);
    if (nmf->parsed()) run_nmf(no);
    if (rerun->parsed()) run_rerun(rr_manifest, rr_out);
  } catch (const omfb::ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const omfb::DimensionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const omfb::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const omfb::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const omfb::NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
