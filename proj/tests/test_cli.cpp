#include <doctest.h>

#include "himpute/analysis_pooling.hpp"
#include "himpute/data_model.hpp"
#include "himpute/stochastic.hpp"

#include <nlohmann/json.hpp>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace himpute;

namespace {

namespace fs = std::filesystem;

// Scratch directory for one test case, removed on destruction.
struct Workdir {
  fs::path root;

  explicit Workdir(const std::string& tag) {
    root = fs::temp_directory_path() / ("himpute_cli_" + tag);
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workdir() {
    std::error_code ec;
    fs::remove_all(root, ec);
  }

  std::string path(const std::string& name) const { return (root / name).string(); }
};

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run_cli_cmd(const std::string& args, const Workdir& dir,
                      const std::string& env_prefix = "") {
  const std::string out_file = dir.path("__stdout");
  const std::string err_file = dir.path("__stderr");
  const std::string cmd = env_prefix + std::string(HIMPUTE_CLI_PATH) + " " + args +
                          " >" + out_file + " 2>" + err_file;
  const int status = std::system(cmd.c_str());
  RunResult res;
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  res.out = slurp(out_file);
  res.err = slurp(err_file);
  return res;
}

// Small regression dataset with holes in y, written as a CSV.
void write_holed_csv(const std::string& path, int n = 80, int p = 10,
                     std::uint64_t seed = 21) {
  RngStream rng(seed);
  std::ofstream out(path);
  out << "y";
  for (int j = 1; j <= p; ++j) out << ",x" << j;
  out << "\n";
  for (int i = 0; i < n; ++i) {
    std::vector<double> xs(p);
    for (int j = 0; j < p; ++j) xs[j] = rng.next_normal();
    const double y = 0.5 + xs[0] - 0.7 * xs[1] + 0.5 * rng.next_normal();
    if (i % 4 == 1) {
      out << "NA";
    } else {
      out << y;
    }
    for (int j = 0; j < p; ++j) out << "," << xs[j];
    out << "\n";
  }
}

}  // namespace

TEST_CASE("version flag prints the tool version and exits 0") {
  Workdir dir("version");
  const RunResult res = run_cli_cmd("--version", dir);
  CHECK(res.exit_code == 0);
  CHECK(res.out.find("himpute 0.1.0") != std::string::npos);
}

TEST_CASE("no subcommand is a usage error") {
  Workdir dir("nosub");
  const RunResult res = run_cli_cmd("", dir);
  CHECK(res.exit_code == 2);
}

TEST_CASE("unknown flags and bad values exit 2") {
  Workdir dir("badflag");
  CHECK(run_cli_cmd("impute --no-such-flag", dir).exit_code == 2);
  CHECK(run_cli_cmd("frobnicate", dir).exit_code == 2);
}

TEST_CASE("impute validates its options before touching data") {
  Workdir dir("validate");
  write_holed_csv(dir.path("data.csv"));
  const RunResult no_in = run_cli_cmd("impute --target y", dir);
  CHECK(no_in.exit_code == 2);
  CHECK(no_in.err.find("--in") != std::string::npos);

  const RunResult gs = run_cli_cmd(
      "impute --in " + dir.path("data.csv") + " --target y --method gs", dir);
  CHECK(gs.exit_code == 2);
  CHECK(gs.err.find("analysis") != std::string::npos);

  const RunResult m1 = run_cli_cmd(
      "impute --in " + dir.path("data.csv") + " --target y --M 1", dir);
  CHECK(m1.exit_code == 2);
}

TEST_CASE("missing input files are runtime errors, exit 1") {
  Workdir dir("missingfile");
  const RunResult res = run_cli_cmd(
      "impute --in " + dir.path("nope.csv") + " --target y", dir);
  CHECK(res.exit_code == 1);
  CHECK(res.err.find("error:") != std::string::npos);
}

TEST_CASE("impute writes M padded files plus a meta document") {
  Workdir dir("impute");
  write_holed_csv(dir.path("data.csv"));
  const RunResult res = run_cli_cmd(
      "impute --in " + dir.path("data.csv") +
          " --target y --method spca_st --M 3 --seed 11 --out-prefix " +
          dir.path("imp"),
      dir);
  REQUIRE(res.exit_code == 0);
  CHECK(fs::exists(dir.path("imp_m01.csv")));
  CHECK(fs::exists(dir.path("imp_m02.csv")));
  CHECK(fs::exists(dir.path("imp_m03.csv")));
  CHECK_FALSE(fs::exists(dir.path("imp_m04.csv")));

  const auto meta = nlohmann::json::parse(slurp(dir.root / "imputation_meta.json"));
  CHECK(meta["method"] == "spca_st");
  CHECK(meta["M"] == 3);
  CHECK(meta["target"] == "y");
  CHECK(meta["n_missing"] == 20);
  CHECK(meta["v"].get<int>() >= 1);
  CHECK(meta["d"].get<int>() >= 1);
  CHECK(meta["screened_columns"].is_array());
  CHECK(meta["files"].size() == 3);

  // Each completed file re-reads as a fully observed table of the same shape.
  for (const auto& f : meta["files"]) {
    const NamedMatrix table = load_complete_csv(f.get<std::string>());
    CHECK(table.values.rows() == 80);
    CHECK(table.values.cols() == 11);
    CHECK(table.values.allFinite());
  }

  // Identical invocation reproduces the files bit for bit.
  const RunResult again = run_cli_cmd(
      "impute --in " + dir.path("data.csv") +
          " --target y --method spca_st --M 3 --seed 11 --out-prefix " +
          dir.path("rep"),
      dir);
  REQUIRE(again.exit_code == 0);
  CHECK(slurp(dir.path("imp_m02.csv")) == slurp(dir.path("rep_m02.csv")));
}

TEST_CASE("impute --keep pins columns into the design and the meta") {
  Workdir dir("keep");
  write_holed_csv(dir.path("data.csv"));
  const RunResult res = run_cli_cmd(
      "impute --in " + dir.path("data.csv") +
          " --target y --method spca_st --M 3 --seed 11 --keep x3 --out-prefix " +
          dir.path("imp"),
      dir);
  REQUIRE(res.exit_code == 0);
  const auto meta = nlohmann::json::parse(slurp(dir.root / "imputation_meta.json"));
  REQUIRE(meta.contains("kept_columns"));
  REQUIRE(meta["kept_columns"].size() == 1);
  CHECK(meta["kept_columns"][0] == "x3");
  for (const auto& name : meta["screened_columns"]) CHECK(name != "x3");

  // Unknown names, the target, and duplicates are configuration errors.
  const std::string base = "impute --in " + dir.path("data.csv") +
                           " --target y --out-prefix " + dir.path("z") + " --keep ";
  CHECK(run_cli_cmd(base + "zz", dir).exit_code == 2);
  CHECK(run_cli_cmd(base + "y", dir).exit_code == 2);
  CHECK(run_cli_cmd(base + "x1,x1", dir).exit_code == 2);
}

TEST_CASE("analyze pools imputed files and matches the library oracle") {
  Workdir dir("analyze");
  write_holed_csv(dir.path("data.csv"));
  REQUIRE(run_cli_cmd("impute --in " + dir.path("data.csv") +
                          " --target y --method sdr_sir --M 4 --seed 3 "
                          "--n-perm 100 --out-prefix " +
                          dir.path("imp"),
                      dir)
              .exit_code == 0);
  const RunResult res = run_cli_cmd(
      "analyze --in-prefix " + dir.path("imp") +
          " --M 4 --outcome y --predictors x1,x2 --family linear --out " +
          dir.path("pooled.csv") + " --json " + dir.path("pooled.json"),
      dir);
  REQUIRE(res.exit_code == 0);

  // Oracle: load the same four files and pool in-process.
  std::vector<FitResult> fits;
  for (int m = 1; m <= 4; ++m) {
    const NamedMatrix table =
        load_complete_csv(dir.path("imp_m0" + std::to_string(m) + ".csv"));
    AnalysisSpec spec;
    spec.outcome = table.column("y");
    spec.predictors = {table.column("x1"), table.column("x2")};
    fits.push_back(fit_analysis(table.values, spec));
  }
  const PooledResult pooled = rubin_pool(fits);

  const auto rows = nlohmann::json::parse(slurp(dir.path("pooled.json")));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0]["coefficient"] == "(intercept)");
  CHECK(rows[1]["coefficient"] == "x1");
  CHECK(rows[2]["coefficient"] == "x2");
  for (int j = 0; j < 3; ++j) {
    CHECK(rows[j]["estimate"].get<double>() ==
          doctest::Approx(pooled.qbar[j]).epsilon(1e-10));
    CHECK(rows[j]["se"].get<double>() ==
          doctest::Approx(std::sqrt(pooled.T[j])).epsilon(1e-10));
    CHECK(rows[j]["p_value"].get<double>() ==
          doctest::Approx(pooled.p_value[j]).epsilon(1e-10));
  }

  std::ifstream csv(dir.path("pooled.csv"));
  std::string header;
  std::getline(csv, header);
  CHECK(header == "method,coefficient,estimate,se,df,ci_low,ci_high,p_value");
}

TEST_CASE("analyze refuses a single input file") {
  Workdir dir("analyze1");
  write_holed_csv(dir.path("data.csv"));
  REQUIRE(run_cli_cmd("impute --in " + dir.path("data.csv") +
                          " --target y --M 2 --out-prefix " + dir.path("imp"),
                      dir)
              .exit_code == 0);
  const RunResult res = run_cli_cmd(
      "analyze --inputs " + dir.path("imp_m01.csv") +
          " --outcome y --predictors x1",
      dir);
  CHECK(res.exit_code == 2);
  CHECK(res.err.find("M >= 2") != std::string::npos);
}

TEST_CASE("json config supplies values and command-line flags override it") {
  Workdir dir("config");
  write_holed_csv(dir.path("data.csv"));
  nlohmann::json cfg;
  cfg["in"] = dir.path("data.csv");
  cfg["target"] = "y";
  cfg["method"] = "spca_pmd";
  cfg["M"] = 2;
  cfg["seed"] = 5;
  cfg["out_prefix"] = dir.path("fromfile");
  {
    std::ofstream out(dir.path("cfg.json"));
    out << cfg.dump();
  }
  const RunResult file_only = run_cli_cmd("impute --config " + dir.path("cfg.json"), dir);
  REQUIRE(file_only.exit_code == 0);
  CHECK(fs::exists(dir.path("fromfile_m01.csv")));
  CHECK(fs::exists(dir.path("fromfile_m02.csv")));
  const auto meta = nlohmann::json::parse(slurp(dir.root / "imputation_meta.json"));
  CHECK(meta["method"] == "spca_pmd");

  // A flag beats the file: M becomes 3.
  const RunResult overridden = run_cli_cmd(
      "impute --config " + dir.path("cfg.json") + " --M 3 --out-prefix " +
          dir.path("flag"),
      dir);
  REQUIRE(overridden.exit_code == 0);
  CHECK(fs::exists(dir.path("flag_m03.csv")));

  // Unknown keys are rejected with their names.
  cfg["tarrget"] = "oops";
  {
    std::ofstream out(dir.path("bad.json"));
    out << cfg.dump();
  }
  const RunResult bad = run_cli_cmd("impute --config " + dir.path("bad.json"), dir);
  CHECK(bad.exit_code == 2);
  CHECK(bad.err.find("tarrget") != std::string::npos);

  // Malformed JSON is a usage error too.
  {
    std::ofstream out(dir.path("broken.json"));
    out << "{not json";
  }
  CHECK(run_cli_cmd("impute --config " + dir.path("broken.json"), dir).exit_code == 2);
}

TEST_CASE("simulate writes results and meta for an explicit cell") {
  Workdir dir("simulate");
  const RunResult res = run_cli_cmd(
      "simulate --n 60 --p 60 --reps 2 --M 3 --seed 4 --methods gs,cc "
      "--out-dir " + dir.path("out"),
      dir);
  REQUIRE(res.exit_code == 0);
  std::ifstream csv(dir.path("out/results.csv"));
  std::string header;
  std::getline(csv, header);
  CHECK(header == "method,p,c,rho,cov_family,bias,se,sd,mse,cr,reps_used");
  int rows = 0;
  std::string line;
  while (std::getline(csv, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 2);
  const auto meta = nlohmann::json::parse(slurp(dir.root / "out/run_meta.json"));
  CHECK(meta["config"]["p"] == 60);
  CHECK(meta["failures"]["cc"] == 0);
}

TEST_CASE("simulate design presets expand the grid unless pinned by flags") {
  Workdir dir("design");
  // Pinning rho and p collapses the preset to a single cell; the meta document
  // then carries the design name and one cell entry.
  const RunResult res = run_cli_cmd(
      "simulate --design table1 --rho 0.1 --p 60 --n 60 --reps 2 --M 3 "
      "--methods gs --seed 1 --out-dir " + dir.path("out"),
      dir);
  REQUIRE(res.exit_code == 0);
  const auto meta = nlohmann::json::parse(slurp(dir.root / "out/run_meta.json"));
  CHECK(meta["design"] == "table1");
  REQUIRE(meta["cells"].is_array());
  CHECK(meta["cells"].size() == 1);
  CHECK(meta["cells"][0]["config"]["cov_family"] == "ar1");
  CHECK(meta["cells"][0]["config"]["c"] == 4);

  CHECK(run_cli_cmd("simulate --design table9 --out-dir " + dir.path("o2"), dir)
            .exit_code == 2);
}

TEST_CASE("simulate honors the threads environment variable") {
  Workdir dir("threadsenv");
  const RunResult bad = run_cli_cmd(
      "simulate --n 60 --p 60 --reps 2 --methods gs --out-dir " + dir.path("o"),
      dir, "HIMPUTE_THREADS=abc ");
  CHECK(bad.exit_code == 2);
  const RunResult good = run_cli_cmd(
      "simulate --n 60 --p 60 --reps 2 --M 3 --methods gs --seed 2 --out-dir " +
          dir.path("o"),
      dir, "HIMPUTE_THREADS=2 ");
  CHECK(good.exit_code == 0);
}

TEST_CASE("pool combines per-imputation estimate/variance rows by coefficient") {
  Workdir dir("pool");
  {
    std::ofstream out(dir.path("fits.csv"));
    out << "coef,estimate,variance\n";
    out << "beta1,1,1\nbeta1,2,1\nbeta1,3,1\n";
    out << "beta2,5,4\nbeta2,5,4\n";
  }
  const RunResult res = run_cli_cmd(
      "pool --in " + dir.path("fits.csv") + " --out " + dir.path("pooled.csv"), dir);
  REQUIRE(res.exit_code == 0);
  std::ifstream csv(dir.path("pooled.csv"));
  std::string header;
  std::getline(csv, header);
  CHECK(header == "coefficient,M,estimate,se,df,ci_low,ci_high,p_value");
  std::string row1;
  std::string row2;
  std::getline(csv, row1);
  std::getline(csv, row2);
  // beta1: qbar 2, W 1, B 1, T 7/3, df 6.125 (hand-worked Rubin example).
  CHECK(row1.find("beta1,3,2,") == 0);
  CHECK(row1.find("6.125") != std::string::npos);
  // beta2: identical fits, B = 0, se = 2, infinite df.
  CHECK(row2.find("beta2,2,5,2,inf") == 0);

  CHECK(run_cli_cmd("pool --in " + dir.path("nope.csv"), dir).exit_code == 1);
  {
    std::ofstream out(dir.path("short.csv"));
    out << "coef,estimate,variance\nonly,1,1\n";
  }
  CHECK(run_cli_cmd("pool --in " + dir.path("short.csv"), dir).exit_code == 2);
}
