#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "omfb/dataio.hpp"
#include "omfb/matrix.hpp"
#include "omfb/rng.hpp"

namespace fs = std::filesystem;

namespace {

std::string g_cli;  // path to the omfb binary, from the command line

int run_cli(const std::string& args) {
  const std::string cmd = g_cli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const std::string& path) {
  std::ifstream in(path);
  std::size_t lines = 0;
  std::string line;
  while (std::getline(in, line)) ++lines;
  return lines;
}

// trace rows as (samples, error) strings; the seconds column is wall-clock
std::vector<std::pair<std::string, std::string>> trace_fields(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::pair<std::string, std::string>> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    rows.emplace_back(line.substr(0, c1), line.substr(c2 + 1));
  }
  return rows;
}

std::map<std::string, std::string> read_kv(const std::string& path) {
  std::ifstream in(path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

void write_rank2_dataset(const std::string& path, omfb::Index m, omfb::Index n) {
  const omfb::Matrix Y =
      omfb::normal_matrix(m, 2, 111) * omfb::normal_matrix(2, n, 222);
  omfb::save_matrix_csv(Y, path);
}

}  // namespace

TEST_CASE("factorize: tiny dataset produces the three outputs") {
  TempDir tmp("omfb_cli_factorize");
  std::ofstream(tmp.file("tiny.csv"))
      << "1,2,3,4,5,6\n2,4,6,8,10,12\n1,1,1,1,1,1\n0,1,0,1,0,1\n";
  const int code = run_cli("factorize " + tmp.file("tiny.csv") + " --rank 2 --epochs 3 --out " +
                           tmp.file("out"));
  CHECK(code == 0);
  CHECK(fs::exists(tmp.file("out") + "/dictionary.csv"));
  CHECK(fs::exists(tmp.file("out") + "/coefficients.csv"));
  CHECK(fs::exists(tmp.file("out") + "/trace.csv"));
  CHECK(fs::exists(tmp.file("out") + "/manifest.txt"));
  CHECK(line_count(tmp.file("out") + "/trace.csv") == 4);  // header + one per epoch
}

TEST_CASE("factorize: zero epochs writes the initialization and an empty trace") {
  TempDir tmp("omfb_cli_epochs0");
  std::ofstream(tmp.file("d.csv")) << "1,2\n3,4\n";
  const int code = run_cli("factorize " + tmp.file("d.csv") +
                           " --rank 1 --epochs 0 --out " + tmp.file("out"));
  CHECK(code == 0);
  CHECK(line_count(tmp.file("out") + "/trace.csv") == 1);  // header only
  const auto dict = omfb::load_matrix({tmp.file("out") + "/dictionary.csv"});
  CHECK(dict.values.rows() == 2);
  CHECK(dict.values.cols() == 1);
  CHECK(dict.values.norm() > 0.0);
}

TEST_CASE("factorize: trace error collapses on synthetic low-rank data") {
  TempDir tmp("omfb_cli_synth");
  write_rank2_dataset(tmp.file("synth.csv"), 10, 30);
  const int code = run_cli("factorize " + tmp.file("synth.csv") +
                           " --rank 2 --lambda 1 --epochs 30 --seed 3 --out " +
                           tmp.file("out"));
  REQUIRE(code == 0);
  const auto rows = trace_fields(tmp.file("out") + "/trace.csv");
  REQUIRE(rows.size() == 30);
  const double initial = std::stod(rows.front().second);
  const double final_error = std::stod(rows.back().second);
  CHECK(final_error <= 1e-2 * initial);
}

TEST_CASE("factorize: missing values are rejected") {
  TempDir tmp("omfb_cli_nan");
  std::ofstream(tmp.file("nan.csv")) << "1,NaN\n2,3\n";
  CHECK(run_cli("factorize " + tmp.file("nan.csv") + " --rank 1 --out " +
                tmp.file("out")) == 2);
}

TEST_CASE("factorize: unreadable dataset exits with the I/O code") {
  TempDir tmp("omfb_cli_io");
  CHECK(run_cli("factorize " + tmp.file("absent.csv") + " --out " + tmp.file("out")) == 3);
}

TEST_CASE("impute: full mask returns the input matrix") {
  TempDir tmp("omfb_cli_impute_full");
  write_rank2_dataset(tmp.file("d.csv"), 6, 8);
  omfb::save_matrix_csv(omfb::Matrix::Ones(6, 8), tmp.file("mask.csv"));
  const int code = run_cli("impute " + tmp.file("d.csv") + " --rank 2 --epochs 2" +
                           " --mask-file " + tmp.file("mask.csv") + " --out " +
                           tmp.file("out"));
  REQUIRE(code == 0);
  const auto input = omfb::load_matrix({tmp.file("d.csv")});
  const auto imputed = omfb::load_matrix({tmp.file("out") + "/imputed.csv"});
  CHECK(imputed.values == input.values);
}

TEST_CASE("impute: hidden fraction reports a positive missing-only SNR") {
  TempDir tmp("omfb_cli_impute_hide");
  write_rank2_dataset(tmp.file("d.csv"), 16, 40);
  const int code = run_cli("impute " + tmp.file("d.csv") +
                           " --rank 2 --epochs 20 --hide-fraction 0.25 --mask-seed 5" +
                           " --seed 2 --out " + tmp.file("out"));
  REQUIRE(code == 0);
  const auto kv = read_kv(tmp.file("out") + "/snr.txt");
  REQUIRE(kv.count("snr_missing_db") == 1);
  CHECK(std::stod(kv.at("snr_missing_db")) > 0.0);
  REQUIRE(kv.count("snr_missing_zero_fill_db") == 1);
  CHECK(std::stod(kv.at("snr_missing_zero_fill_db")) == 0.0);
}

TEST_CASE("impute: grid export writes PGM files") {
  TempDir tmp("omfb_cli_impute_grid");
  write_rank2_dataset(tmp.file("d.csv"), 4, 6);
  const int code = run_cli("impute " + tmp.file("d.csv") +
                           " --rank 2 --epochs 2 --hide-fraction 0.25 --export-grid" +
                           " --image-height 2 --image-width 2 --grid-cols 3 --out " +
                           tmp.file("out"));
  REQUIRE(code == 0);
  const std::string observed = read_file(tmp.file("out") + "/observed.pgm");
  CHECK(observed.substr(0, 2) == "P5");
  CHECK(fs::exists(tmp.file("out") + "/imputed.pgm"));
}

TEST_CASE("impute: no mask source is an argument error") {
  TempDir tmp("omfb_cli_impute_nomask");
  write_rank2_dataset(tmp.file("d.csv"), 4, 6);
  CHECK(run_cli("impute " + tmp.file("d.csv") + " --out " + tmp.file("out")) == 2);
}

TEST_CASE("impute: conflicting mask flags are an argument error") {
  TempDir tmp("omfb_cli_impute_conflict");
  write_rank2_dataset(tmp.file("d.csv"), 4, 6);
  omfb::save_matrix_csv(omfb::Matrix::Ones(4, 6), tmp.file("mask.csv"));
  CHECK(run_cli("impute " + tmp.file("d.csv") + " --mask-file " + tmp.file("mask.csv") +
                " --hide-fraction 0.25 --out " + tmp.file("out")) == 2);
}

TEST_CASE("benchmark: two arms, matching trace and comparison shapes") {
  TempDir tmp("omfb_cli_bench");
  write_rank2_dataset(tmp.file("d.csv"), 8, 20);
  const int code = run_cli("benchmark " + tmp.file("d.csv") +
                           " --rank 2 --epochs 2 --batch-size 5 --seed 9 --out " +
                           tmp.file("out"));
  REQUIRE(code == 0);
  const std::string omfb_trace = tmp.file("out") + "/trace_omfb.csv";
  const std::string sgmf_trace = tmp.file("out") + "/trace_sgmf.csv";
  REQUIRE(fs::exists(omfb_trace));
  REQUIRE(fs::exists(sgmf_trace));
  CHECK(line_count(omfb_trace) == 3);
  CHECK(line_count(sgmf_trace) == 3);
  CHECK(line_count(tmp.file("out") + "/comparison.csv") == 3);

  // identical sample streams: the samples column must agree row by row
  const auto omfb_rows = trace_fields(omfb_trace);
  const auto sgmf_rows = trace_fields(sgmf_trace);
  REQUIRE(omfb_rows.size() == sgmf_rows.size());
  for (std::size_t i = 0; i < omfb_rows.size(); ++i)
    CHECK(omfb_rows[i].first == sgmf_rows[i].first);
}

TEST_CASE("benchmark: merged CSV supports per-row ordering checks") {
  TempDir tmp("omfb_cli_bench_order");
  write_rank2_dataset(tmp.file("d.csv"), 8, 20);
  const int code = run_cli("benchmark " + tmp.file("d.csv") +
                           " --rank 2 --epochs 3 --batch-size 5 --seed 9" +
                           " --sgmf-alpha 0.05 --out " + tmp.file("out"));
  REQUIRE(code == 0);
  std::ifstream in(tmp.file("out") + "/comparison.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "samples,omfb_error,sgmf_error");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string samples, omfb_err, sgmf_err;
    std::getline(ss, samples, ',');
    std::getline(ss, omfb_err, ',');
    std::getline(ss, sgmf_err, ',');
    CHECK(std::stod(omfb_err) >= 0.0);
    CHECK(std::stod(sgmf_err) >= 0.0);
    ++rows;
  }
  CHECK(rows == 3);
}

TEST_CASE("benchmark: unknown algorithm names are rejected") {
  TempDir tmp("omfb_cli_bench_bad");
  write_rank2_dataset(tmp.file("d.csv"), 4, 6);
  CHECK(run_cli("benchmark " + tmp.file("d.csv") + " --algorithms omfb,alsqr --out " +
                tmp.file("out")) == 2);
}

TEST_CASE("nmf: zero iterations writes the initialization") {
  TempDir tmp("omfb_cli_nmf0");
  omfb::save_matrix_csv(omfb::normal_matrix(5, 7, 3).cwiseAbs(), tmp.file("d.csv"));
  const int code = run_cli("nmf " + tmp.file("d.csv") +
                           " --rank 2 --iterations 0 --out " + tmp.file("out"));
  REQUIRE(code == 0);
  const auto W = omfb::load_matrix({tmp.file("out") + "/w.csv"});
  CHECK(W.values.rows() == 5);
  CHECK(W.values.cols() == 2);
  CHECK((W.values.array() >= 0.0).all());
}

TEST_CASE("nmf: negative entries are rejected") {
  TempDir tmp("omfb_cli_nmf_neg");
  std::ofstream(tmp.file("neg.csv")) << "1,2\n-3,4\n";
  CHECK(run_cli("nmf " + tmp.file("neg.csv") + " --rank 1 --out " + tmp.file("out")) == 2);
}

TEST_CASE("nmf: full mask file matches the unmasked run") {
  TempDir tmp("omfb_cli_nmf_mask");
  omfb::save_matrix_csv(omfb::normal_matrix(6, 8, 5).cwiseAbs(), tmp.file("d.csv"));
  omfb::save_matrix_csv(omfb::Matrix::Ones(6, 8), tmp.file("mask.csv"));
  REQUIRE(run_cli("nmf " + tmp.file("d.csv") + " --rank 2 --iterations 20 --seed 4" +
                  " --mask-file " + tmp.file("mask.csv") + " --out " +
                  tmp.file("masked")) == 0);
  REQUIRE(run_cli("nmf " + tmp.file("d.csv") + " --rank 2 --iterations 20 --seed 4" +
                  " --out " + tmp.file("plain")) == 0);
  const auto masked = omfb::load_matrix({tmp.file("masked") + "/w.csv"});
  const auto plain = omfb::load_matrix({tmp.file("plain") + "/w.csv"});
  CHECK((masked.values - plain.values).cwiseAbs().maxCoeff() <=
        1e-9 * (1.0 + plain.values.norm()));
}

TEST_CASE("rerun: reproduces factor outputs byte for byte") {
  TempDir tmp("omfb_cli_rerun");
  write_rank2_dataset(tmp.file("d.csv"), 6, 10);
  REQUIRE(run_cli("factorize " + tmp.file("d.csv") +
                  " --rank 2 --epochs 3 --seed 11 --out " + tmp.file("first")) == 0);
  REQUIRE(run_cli("rerun --manifest " + tmp.file("first") + "/manifest.txt --out " +
                  tmp.file("second")) == 0);
  CHECK(read_file(tmp.file("first") + "/dictionary.csv") ==
        read_file(tmp.file("second") + "/dictionary.csv"));
  CHECK(read_file(tmp.file("first") + "/coefficients.csv") ==
        read_file(tmp.file("second") + "/coefficients.csv"));
  CHECK(trace_fields(tmp.file("first") + "/trace.csv") ==
        trace_fields(tmp.file("second") + "/trace.csv"));
}

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (!arg.empty() && arg.front() != '-') {
      g_cli = arg;
      break;
    }
  }
  if (g_cli.empty()) {
    const char* env = std::getenv("OMFB_CLI");
    if (env) g_cli = env;
  }
  if (g_cli.empty()) {
    std::fprintf(stderr, "usage: test_cli <path-to-omfb-binary>\n");
    return 1;
  }
  doctest::Context context;
  context.applyCommandLine(argc, argv);
  return context.run();
}
