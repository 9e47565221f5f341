#include "himpute/cli.hpp"

#include "himpute/baselines.hpp"
#include "himpute/simulation.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>

namespace himpute {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::string token;
  for (const char ch : s) {
    if (ch == ',') {
      out.push_back(token);
      token.clear();
    } else {
      token += ch;
    }
  }
  out.push_back(token);
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Flat JSON config overlay for one subcommand: `bind` registers an option
// together with a setter so file keys land in the same variables; flags given
// on the command line take precedence. Unknown keys are rejected, all at once.
class JsonOverlay {
 public:
  explicit JsonOverlay(CLI::App* app) : app_(app) {
    app_->add_option("--config", path_,
                     "flat JSON config file; command-line flags override its keys");
  }

  template <typename T>
  CLI::Option* bind(const std::string& flag, T& target, const std::string& desc) {
    auto* opt = app_->add_option(flag, target, desc);
    entries_[key_of(flag)] = {opt, [&target](const json& v) { target = v.get<T>(); }};
    return opt;
  }

  CLI::Option* bind_flag(const std::string& flag, bool& target,
                         const std::string& desc) {
    auto* opt = app_->add_flag(flag, target, desc);
    entries_[key_of(flag)] = {opt, [&target](const json& v) { target = v.get<bool>(); }};
    return opt;
  }

  CLI::Option* bind_list(const std::string& flag, std::vector<std::string>& target,
                         const std::string& desc) {
    auto* opt = app_->add_option(flag, target, desc)->delimiter(',');
    entries_[key_of(flag)] = {opt, [&target](const json& v) {
                                target.clear();
                                if (v.is_array()) {
                                  for (const auto& item : v) {
                                    target.push_back(item.get<std::string>());
                                  }
                                } else {
                                  target = split_csv_list(v.get<std::string>());
                                }
                              }};
    return opt;
  }

  // Loads the file (if any) and applies keys not already set on the command
  // line. Must run after parsing.
  void apply() {
    if (path_.empty()) return;
    std::ifstream in(path_);
    if (!in) throw ConfigError("cannot open config file '" + path_ + "'");
    json doc;
    try {
      in >> doc;
    } catch (const std::exception& e) {
      throw ConfigError("config file '" + path_ + "' is not valid JSON: " + e.what());
    }
    if (!doc.is_object()) {
      throw ConfigError("config file '" + path_ + "' must hold a flat JSON object");
    }
    std::vector<std::string> unknown;
    for (const auto& [key, value] : doc.items()) {
      const auto it = entries_.find(key);
      if (it == entries_.end()) {
        unknown.push_back(key);
        continue;
      }
      if (it->second.option->count() > 0) continue;
      try {
        it->second.set(value);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type");
      }
      applied_.insert(key);
    }
    if (!unknown.empty()) {
      std::sort(unknown.begin(), unknown.end());
      std::string msg = "unknown config keys:";
      for (const auto& key : unknown) msg += " '" + key + "'";
      throw ConfigError(msg);
    }
  }

  // True when the value came from the command line or the config file.
  bool was_set(const std::string& flag) const {
    const auto it = entries_.find(key_of(flag));
    if (it == entries_.end()) return false;
    return it->second.option->count() > 0 || applied_.count(key_of(flag)) > 0;
  }

 private:
  struct Entry {
    CLI::Option* option = nullptr;
    std::function<void(const json&)> set;
  };

  static std::string key_of(const std::string& flag) {
    std::size_t pos = 0;
    while (pos < flag.size() && flag[pos] == '-') ++pos;
    std::string key = flag.substr(pos);
    for (char& ch : key) {
      if (ch == '-') ch = '_';
    }
    return key;
  }

  CLI::App* app_;
  std::string path_;
  std::map<std::string, Entry> entries_;
  std::set<std::string> applied_;
};

void require(bool present, const std::string& what) {
  if (!present) throw ConfigError("missing required option " + what);
}

std::string padded_index(int m, int M) {
  std::string digits = std::to_string(m);
  const std::size_t width = std::max<std::size_t>(2, std::to_string(M).size());
  while (digits.size() < width) digits.insert(digits.begin(), '0');
  return digits;
}

// ---------------------------------------------------------------------------
// impute

struct ImputeArgs {
  std::string in_path;
  std::string target;
  std::string method = "spca_st";
  std::string out_prefix = "imputed";
  std::string na_tokens = "NA,NaN,";
  int M = 30;
  std::uint64_t seed = 0;
  int cap = 0;  // 0 = no explicit cap
  double sparsity = 0.7;
  std::string components = "first_one";
  int nslices = 8;
  int n_perm = 200;
  double alpha = 0.05;
  int d_cap = 4;
  double ridge = 1e-5;
  int knn_k = 5;
  bool refit_per_draw = false;
  bool response_phd = false;
  std::string keep;  // comma-separated column names
};

ImputeOptions to_impute_options(const ImputeArgs& args) {
  ImputeOptions opts;
  if (args.cap < 0) throw ConfigError("--cap must be >= 0");
  if (args.cap > 0) opts.screen_cap = args.cap;
  opts.sparsity = args.sparsity;
  opts.component_rule = component_rule_from_string(args.components);
  opts.sdr.nslices = args.nslices;
  opts.sdr.n_perm = args.n_perm;
  opts.sdr.alpha = args.alpha;
  opts.sdr.d_cap = args.d_cap;
  opts.sdr.response_based_phd = args.response_phd;
  opts.ridge = args.ridge;
  opts.refit_per_draw = args.refit_per_draw;
  return opts;
}

int cmd_impute(const ImputeArgs& args) {
  require(!args.in_path.empty(), "--in");
  require(!args.target.empty(), "--target");
  const Method method = method_from_string(args.method);
  if (method == Method::GS || method == Method::CC) {
    throw ConfigError("'" + args.method + "' is an analysis, not an imputation method");
  }
  if (args.M < 2) throw ConfigError("--M must be >= 2");

  const IncompleteMatrix data =
      load_csv(args.in_path, args.target, split_csv_list(args.na_tokens));
  if (data.n_missing() == 0) {
    std::cerr << "warning: no missing values in target column '" << args.target
              << "'; the imputed datasets are identical copies\n";
  }

  // --keep names columns exempt from screening/reduction (and from KNN donor
  // pools); the regression methods add them to the design directly.
  std::vector<int> keep_cols;
  if (!args.keep.empty()) {
    for (const std::string& name : split_csv_list(args.keep)) {
      const auto it =
          std::find(data.column_names.begin(), data.column_names.end(), name);
      if (it == data.column_names.end()) {
        throw ConfigError("--keep column '" + name + "' not found in the input");
      }
      if (name == args.target) {
        throw ConfigError("--keep cannot include the target column");
      }
      const int j = static_cast<int>(it - data.column_names.begin());
      if (std::find(keep_cols.begin(), keep_cols.end(), j) != keep_cols.end()) {
        throw ConfigError("--keep lists column '" + name + "' twice");
      }
      keep_cols.push_back(j);
    }
  }

  json meta;
  meta["method"] = to_string(method);
  meta["M"] = args.M;
  meta["seed"] = args.seed;
  meta["target"] = args.target;
  meta["n"] = data.n_rows();
  meta["p"] = data.n_cols();
  meta["n_missing"] = data.n_missing();
  meta["version"] = kVersion;

  if (!keep_cols.empty()) {
    json kept = json::array();
    for (const int j : keep_cols) kept.push_back(data.column_names[j]);
    meta["kept_columns"] = kept;
  }

  std::vector<Matrix> completed;
  RngStream rng(args.seed);
  if (method == Method::MI_FULL) {
    // mi_full regresses on every non-target column already, so --keep columns
    // are in the design without special handling.
    const MIEnsemble ensemble = mi_full(data, args.M, args.ridge, rng);
    completed = ensemble.datasets;
    meta["v"] = ensemble.diagnostics.v;
    meta["d"] = ensemble.diagnostics.d;
    meta["sigma_degenerate"] = ensemble.diagnostics.any_sigma_degenerate;
    meta["nothing_to_impute"] = ensemble.diagnostics.nothing_to_impute;
  } else if (method == Method::KNN_S || method == Method::KNN_V) {
    const KnnMode mode =
        method == Method::KNN_S ? KnnMode::SUBJECTS : KnnMode::VARIABLES;
    const ImputeOptions opts = to_impute_options(args);
    const Matrix one = knn_impute(data, args.knn_k, mode, opts.screen_cap, keep_cols);
    completed.assign(args.M, one);
    meta["k"] = args.knn_k;
    meta["single_imputation"] = true;
  } else {
    ImputeOptions opts = to_impute_options(args);
    opts.keep_cols = keep_cols;
    const MIEnsemble ensemble = multiply_impute(data, method, opts, args.M, rng);
    completed = ensemble.datasets;
    const ImputeDiagnostics& diag = ensemble.diagnostics;
    json screened = json::array();
    for (const int j : diag.screened_columns) screened.push_back(data.column_names[j]);
    meta["screened_columns"] = screened;
    meta["v"] = diag.v;
    meta["d"] = diag.d;
    meta["forced_d1"] = diag.forced_d1;
    meta["ridge_repaired"] = diag.ridge_repaired;
    meta["truncated_components"] = diag.truncated_components;
    meta["sigma_degenerate"] = diag.any_sigma_degenerate;
    meta["nothing_to_impute"] = diag.nothing_to_impute;
  }

  std::vector<std::string> files;
  for (int m = 0; m < args.M; ++m) {
    const std::string path =
        args.out_prefix + "_m" + padded_index(m + 1, args.M) + ".csv";
    emit_completed_csv(data, completed[static_cast<std::size_t>(m)], path);
    files.push_back(path);
  }
  meta["files"] = files;

  const fs::path meta_path =
      fs::path(args.out_prefix).parent_path() / "imputation_meta.json";
  std::ofstream meta_out(meta_path);
  if (!meta_out) {
    throw std::runtime_error("cannot open '" + meta_path.string() + "' for writing");
  }
  meta_out << meta.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeArgs {
  std::vector<std::string> inputs;
  std::string in_prefix;
  int M = 0;  // with --in-prefix: number of files to read
  std::string outcome;
  std::vector<std::string> predictors;
  std::string family = "linear";
  std::string out = "pooled.csv";
  std::string json_out;
  std::string method_label = "mi";
};

int cmd_analyze(const AnalyzeArgs& args) {
  std::vector<std::string> files = args.inputs;
  if (files.empty() && !args.in_prefix.empty()) {
    if (args.M < 1) throw ConfigError("--in-prefix needs --M to enumerate files");
    for (int m = 0; m < args.M; ++m) {
      files.push_back(args.in_prefix + "_m" + padded_index(m + 1, args.M) + ".csv");
    }
  }
  require(!files.empty(), "--inputs (or --in-prefix with --M)");
  if (files.size() < 2) throw ConfigError("pooling requires M >= 2");
  require(!args.outcome.empty(), "--outcome");
  require(!args.predictors.empty(), "--predictors");
  const Family family = family_from_string(args.family);

  std::vector<FitResult> fits;
  std::vector<std::string> coef_names;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const NamedMatrix table = load_complete_csv(files[i]);
    AnalysisSpec spec;
    spec.outcome = table.column(args.outcome);
    for (const auto& name : args.predictors) {
      spec.predictors.push_back(table.column(name));
    }
    spec.family = family;
    if (i == 0) {
      coef_names.push_back("(intercept)");
      for (const auto& name : args.predictors) coef_names.push_back(name);
    }
    fits.push_back(fit_analysis(table.values, spec));
  }
  const PooledResult pooled = rubin_pool(fits);

  std::ofstream out(args.out);
  if (!out) throw std::runtime_error("cannot open '" + args.out + "' for writing");
  out << "method,coefficient,estimate,se,df,ci_low,ci_high,p_value\n";
  json rows = json::array();
  for (int j = 0; j < pooled.q(); ++j) {
    const double se = std::sqrt(pooled.T[j]);
    out << args.method_label << ',' << coef_names[j] << ',' << fmt(pooled.qbar[j])
        << ',' << fmt(se) << ',' << fmt(pooled.df[j]) << ',' << fmt(pooled.ci_low[j])
        << ',' << fmt(pooled.ci_high[j]) << ',' << fmt(pooled.p_value[j]) << '\n';
    json row;
    row["method"] = args.method_label;
    row["coefficient"] = coef_names[j];
    row["estimate"] = pooled.qbar[j];
    row["se"] = se;
    row["df"] = std::isfinite(pooled.df[j]) ? json(pooled.df[j]) : json();
    row["ci_low"] = pooled.ci_low[j];
    row["ci_high"] = pooled.ci_high[j];
    row["p_value"] = pooled.p_value[j];
    rows.push_back(row);
  }
  if (!out) throw std::runtime_error("write to '" + args.out + "' failed");
  if (!args.json_out.empty()) {
    std::ofstream jout(args.json_out);
    if (!jout) {
      throw std::runtime_error("cannot open '" + args.json_out + "' for writing");
    }
    jout << rows.dump(2) << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string design;
  std::string out_dir = ".";
  std::vector<std::string> methods;
  int threads = 0;  // 0: HIMPUTE_THREADS env var, else 1
  // SimConfig fields (strings for the enums)
  int n = 100;
  int p = 200;
  int c = 4;
  double rho = 0.1;
  std::string cov = "ar1";
  int block_size = 50;
  double eta = std::numeric_limits<double>::quiet_NaN();  // NaN = per-c default
  double w_noise_var = 3.0;
  bool no_calibrate = false;
  double target_rate = 0.31;
  int reps = 200;
  int M = 30;
  std::uint64_t seed = 0;
  int knn_k = 1;
  // impute options
  int cap = 0;
  double sparsity = 0.7;
  std::string components = "first_one";
  int nslices = 8;
  int n_perm = 200;
  double alpha = 0.05;
  int d_cap = 4;
  double ridge = 1e-5;
  bool refit_per_draw = false;
  bool response_phd = false;
};

const std::vector<Method> kAllMethods = {
    Method::GS,      Method::CC,      Method::MI_FULL, Method::KNN_S,
    Method::KNN_V,   Method::SPCA_ST, Method::SPCA_PMD, Method::SPCA_L,
    Method::SPCA_AL, Method::SDR_SIR, Method::SDR_SAVE, Method::SDR_PHD,
};

SimConfig to_sim_config(const SimulateArgs& args) {
  SimConfig cfg;
  cfg.n = args.n;
  cfg.p = args.p;
  cfg.c = args.c;
  cfg.rho = args.rho;
  cfg.cov_family = cov_family_from_string(args.cov);
  cfg.block_size = args.block_size;
  if (!std::isnan(args.eta)) cfg.eta = args.eta;
  cfg.w_noise_var = args.w_noise_var;
  cfg.calibrate_intercept = !args.no_calibrate;
  cfg.target_rate = args.target_rate;
  cfg.reps = args.reps;
  cfg.M = args.M;
  cfg.seed = args.seed;
  cfg.knn_k = args.knn_k;
  if (args.cap < 0) throw ConfigError("--cap must be >= 0");
  if (args.cap > 0) cfg.impute.screen_cap = args.cap;
  cfg.impute.sparsity = args.sparsity;
  cfg.impute.component_rule = component_rule_from_string(args.components);
  cfg.impute.sdr.nslices = args.nslices;
  cfg.impute.sdr.n_perm = args.n_perm;
  cfg.impute.sdr.alpha = args.alpha;
  cfg.impute.sdr.d_cap = args.d_cap;
  cfg.impute.sdr.response_based_phd = args.response_phd;
  cfg.impute.ridge = args.ridge;
  cfg.impute.refit_per_draw = args.refit_per_draw;
  return cfg;
}

int resolve_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("HIMPUTE_THREADS")) {
    int parsed = 0;
    const auto res = std::from_chars(env, env + std::string(env).size(), parsed);
    if (res.ec != std::errc() || parsed < 1) {
      throw ConfigError("HIMPUTE_THREADS must be a positive integer");
    }
    return parsed;
  }
  return 1;
}

int cmd_simulate(const SimulateArgs& args, const JsonOverlay& overlay) {
  std::vector<Method> methods;
  if (args.methods.empty()) {
    methods = kAllMethods;
  } else {
    for (const auto& name : args.methods) methods.push_back(method_from_string(name));
  }
  const int threads = resolve_threads(args.threads);

  std::vector<SimConfig> cells;
  if (!args.design.empty()) {
    SimConfig base = to_sim_config(args);
    if (args.design == "table1" || args.design == "table3") {
      base.c = 4;
    } else if (args.design == "table2" || args.design == "table4") {
      base.c = 100;
    } else {
      throw ConfigError("unknown --design '" + args.design +
                        "' (expected table1..table4)");
    }
    base.cov_family = (args.design == "table1" || args.design == "table2")
                          ? CovFamily::AR1
                          : CovFamily::BLOCK_CS;
    const std::vector<double> rhos =
        overlay.was_set("--rho") ? std::vector<double>{base.rho}
                                 : std::vector<double>{0.1, 0.5, 0.9};
    const std::vector<int> ps = overlay.was_set("--p") ? std::vector<int>{base.p}
                                                       : std::vector<int>{200, 1000};
    for (const double rho : rhos) {
      for (const int p : ps) {
        SimConfig cell = base;
        cell.rho = rho;
        cell.p = p;
        cells.push_back(cell);
      }
    }
  } else {
    cells.push_back(to_sim_config(args));
  }
  for (const SimConfig& cell : cells) cell.validate();

  fs::create_directories(args.out_dir);
  std::vector<MetricsRow> all_rows;
  json metas = json::array();
  for (const SimConfig& cell : cells) {
    const StudyResult result = run_study(cell, methods, threads);
    all_rows.insert(all_rows.end(), result.rows.begin(), result.rows.end());
    metas.push_back(json::parse(run_meta_string(result)));
  }
  write_results_csv(all_rows, (fs::path(args.out_dir) / "results.csv").string());

  const fs::path meta_path = fs::path(args.out_dir) / "run_meta.json";
  std::ofstream meta_out(meta_path);
  if (!meta_out) {
    throw std::runtime_error("cannot open '" + meta_path.string() + "' for writing");
  }
  if (!args.design.empty()) {
    json doc;
    doc["design"] = args.design;
    doc["cells"] = metas;
    meta_out << doc.dump(2) << '\n';
  } else {
    meta_out << metas.front().dump(2) << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// pool

struct PoolArgs {
  std::string in_path;
  std::string out = "pooled.csv";
};

int cmd_pool(const PoolArgs& args) {
  require(!args.in_path.empty(), "--in");
  std::ifstream in(args.in_path);
  if (!in) throw std::runtime_error("cannot open '" + args.in_path + "' for reading");

  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("'" + args.in_path + "' is empty");
  }
  const auto header = split_csv_list(line);
  int est_col = -1;
  int var_col = -1;
  int coef_col = -1;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == "estimate") est_col = static_cast<int>(j);
    if (header[j] == "variance") var_col = static_cast<int>(j);
    if (header[j] == "coef") coef_col = static_cast<int>(j);
  }
  if (est_col < 0 || var_col < 0) {
    throw ConfigError("pool input needs 'estimate' and 'variance' columns");
  }

  // Rows group by the coef label (single group when absent), one Rubin
  // combination per group.
  std::vector<std::string> group_order;
  std::map<std::string, std::vector<FitResult>> groups;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_list(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error("csv line " + std::to_string(line_no) +
                               ": field count mismatch");
    }
    const auto parse_field = [&](int col) {
      double value = 0.0;
      const auto& cell = fields[static_cast<std::size_t>(col)];
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw std::runtime_error("csv line " + std::to_string(line_no) +
                                 ": cannot parse '" + cell + "'");
      }
      return value;
    };
    FitResult fit;
    fit.estimates = Vector::Constant(1, parse_field(est_col));
    fit.cov = Matrix::Constant(1, 1, parse_field(var_col));
    fit.df = std::numeric_limits<double>::infinity();
    const std::string group =
        coef_col >= 0 ? fields[static_cast<std::size_t>(coef_col)] : "estimate";
    if (groups.find(group) == groups.end()) group_order.push_back(group);
    groups[group].push_back(fit);
  }
  if (group_order.empty()) {
    throw std::runtime_error("'" + args.in_path + "' has no data rows");
  }

  std::ofstream out(args.out);
  if (!out) throw std::runtime_error("cannot open '" + args.out + "' for writing");
  out << "coefficient,M,estimate,se,df,ci_low,ci_high,p_value\n";
  for (const auto& group : group_order) {
    const auto& fits = groups[group];
    if (fits.size() < 2) throw ConfigError("pooling requires M >= 2");
    const PooledResult pooled = rubin_pool(fits);
    out << group << ',' << pooled.M << ',' << fmt(pooled.qbar[0]) << ','
        << fmt(std::sqrt(pooled.T[0])) << ',' << fmt(pooled.df[0]) << ','
        << fmt(pooled.ci_low[0]) << ',' << fmt(pooled.ci_high[0]) << ','
        << fmt(pooled.p_value[0]) << '\n';
  }
  if (!out) throw std::runtime_error("write to '" + args.out + "' failed");
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"multiple imputation of a high-dimensional incomplete variable"};
  app.set_version_flag("--version", std::string("himpute ") + kVersion);
  app.require_subcommand(0, 1);

  ImputeArgs impute_args;
  CLI::App* impute = app.add_subcommand(
      "impute", "screen, reduce and draw M imputed copies of an incomplete column");
  JsonOverlay impute_cfg(impute);
  impute_cfg.bind("--in", impute_args.in_path, "input CSV with a header row");
  impute_cfg.bind("--target", impute_args.target, "name of the incomplete column");
  impute_cfg.bind("--method", impute_args.method,
                  "spca_st|spca_pmd|spca_l|spca_al|sdr_sir|sdr_save|sdr_phd|mi_full|"
                  "knn_s|knn_v");
  impute_cfg.bind("--out-prefix", impute_args.out_prefix,
                  "output prefix; files are <prefix>_mNN.csv");
  impute_cfg.bind("--na", impute_args.na_tokens, "comma-separated missing tokens");
  impute_cfg.bind("--M", impute_args.M, "number of imputed datasets");
  impute_cfg.bind("--seed", impute_args.seed, "random seed");
  impute_cfg.bind("--cap", impute_args.cap, "extra cap on screened columns (0 = none)");
  impute_cfg.bind("--sparsity", impute_args.sparsity, "sparsity level in (0, 1]");
  impute_cfg.bind("--components", impute_args.components, "first_one|var60|var80");
  impute_cfg.bind("--nslices", impute_args.nslices, "slices for sir/save");
  impute_cfg.bind("--n-perm", impute_args.n_perm, "permutations for the dimension test");
  impute_cfg.bind("--alpha", impute_args.alpha, "dimension test level");
  impute_cfg.bind("--d-cap", impute_args.d_cap, "max tested dimension");
  impute_cfg.bind("--ridge", impute_args.ridge, "ridge stabilizer");
  impute_cfg.bind("--knn-k", impute_args.knn_k, "neighbours for knn methods");
  impute_cfg.bind("--keep", impute_args.keep,
                  "comma-separated columns kept out of screening and donor pools "
                  "but used directly in the imputation model (e.g. an outcome)");
  impute_cfg.bind_flag("--refit-per-draw", impute_args.refit_per_draw,
                       "refit screening/reduction for every draw");
  impute_cfg.bind_flag("--response-phd", impute_args.response_phd,
                       "response-based phd instead of residual-based");

  AnalyzeArgs analyze_args;
  CLI::App* analyze = app.add_subcommand(
      "analyze", "fit a model on each completed CSV and pool by Rubin's rules");
  JsonOverlay analyze_cfg(analyze);
  analyze_cfg.bind_list("--inputs", analyze_args.inputs, "completed CSV files");
  analyze_cfg.bind("--in-prefix", analyze_args.in_prefix,
                   "prefix written by impute; needs --M");
  analyze_cfg.bind("--M", analyze_args.M, "file count for --in-prefix");
  analyze_cfg.bind("--outcome", analyze_args.outcome, "outcome column name");
  analyze_cfg.bind_list("--predictors", analyze_args.predictors,
                        "predictor column names");
  analyze_cfg.bind("--family", analyze_args.family, "linear|logistic");
  analyze_cfg.bind("--out", analyze_args.out, "pooled results CSV");
  analyze_cfg.bind("--json", analyze_args.json_out, "also write pooled rows as JSON");
  analyze_cfg.bind("--method-label", analyze_args.method_label,
                   "method column value in the output");

  SimulateArgs sim_args;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Monte Carlo study over the built-in designs");
  JsonOverlay simulate_cfg(simulate);
  simulate_cfg.bind("--design", sim_args.design,
                    "table1..table4 preset grids (3 rho x 2 p)");
  simulate_cfg.bind("--out-dir", sim_args.out_dir, "directory for results.csv");
  simulate_cfg.bind_list("--methods", sim_args.methods,
                         "methods to run (default: all)");
  simulate_cfg.bind("--threads", sim_args.threads,
                    "worker threads (0 = HIMPUTE_THREADS or 1)");
  simulate_cfg.bind("--n", sim_args.n, "sample size");
  simulate_cfg.bind("--p", sim_args.p, "variable count");
  simulate_cfg.bind("--c", sim_args.c, "true-model size (4 or 100)");
  simulate_cfg.bind("--rho", sim_args.rho, "correlation parameter");
  simulate_cfg.bind("--cov", sim_args.cov, "ar1|block_cs");
  simulate_cfg.bind("--block-size", sim_args.block_size, "block size for block_cs");
  simulate_cfg.bind("--eta", sim_args.eta, "signal coefficient (default by c)");
  simulate_cfg.bind("--w-noise-var", sim_args.w_noise_var, "outcome noise variance");
  simulate_cfg.bind_flag("--no-calibrate", sim_args.no_calibrate,
                         "use the literal missingness intercept instead of"
                         " calibrating to the target rate");
  simulate_cfg.bind("--target-rate", sim_args.target_rate,
                    "expected missing fraction under calibration");
  simulate_cfg.bind("--reps", sim_args.reps, "Monte Carlo replicates");
  simulate_cfg.bind("--M", sim_args.M, "imputations per replicate");
  simulate_cfg.bind("--seed", sim_args.seed, "random seed");
  simulate_cfg.bind("--knn-k", sim_args.knn_k, "neighbours for knn methods");
  simulate_cfg.bind("--cap", sim_args.cap, "extra cap on screened columns (0 = none)");
  simulate_cfg.bind("--sparsity", sim_args.sparsity, "sparsity level in (0, 1]");
  simulate_cfg.bind("--components", sim_args.components, "first_one|var60|var80");
  simulate_cfg.bind("--nslices", sim_args.nslices, "slices for sir/save");
  simulate_cfg.bind("--n-perm", sim_args.n_perm, "permutations for the dimension test");
  simulate_cfg.bind("--alpha", sim_args.alpha, "dimension test level");
  simulate_cfg.bind("--d-cap", sim_args.d_cap, "max tested dimension");
  simulate_cfg.bind("--ridge", sim_args.ridge, "ridge stabilizer");
  simulate_cfg.bind_flag("--refit-per-draw", sim_args.refit_per_draw,
                         "refit screening/reduction for every draw");
  simulate_cfg.bind_flag("--response-phd", sim_args.response_phd,
                         "response-based phd instead of residual-based");

  PoolArgs pool_args;
  CLI::App* pool = app.add_subcommand(
      "pool", "Rubin-combine a CSV of per-imputation estimates and variances");
  JsonOverlay pool_cfg(pool);
  pool_cfg.bind("--in", pool_args.in_path, "CSV with estimate,variance[,coef] columns");
  pool_cfg.bind("--out", pool_args.out, "pooled output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (impute->parsed()) {
      impute_cfg.apply();
      return cmd_impute(impute_args);
    }
    if (analyze->parsed()) {
      analyze_cfg.apply();
      return cmd_analyze(analyze_args);
    }
    if (simulate->parsed()) {
      simulate_cfg.apply();
      return cmd_simulate(sim_args, simulate_cfg);
    }
    if (pool->parsed()) {
      pool_cfg.apply();
      return cmd_pool(pool_args);
    }
    std::cerr << app.help();
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace himpute
