#pragma once

#include "himpute/analysis_pooling.hpp"
#include "himpute/imputation.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace himpute {

enum class CovFamily { AR1, BLOCK_CS };

std::string to_string(CovFamily family);
CovFamily cov_family_from_string(const std::string& name);

// One Monte Carlo design cell. The generated data has p base variables
// (y1..yp, with y1 the imputation target), an analysis outcome w, and a
// missingness mechanism on y1 driven by (y2, y3, w).
struct SimConfig {
  int n = 100;
  int p = 200;
  int c = 4;  // true-model size of y1's regression: 4 or 100
  double rho = 0.1;
  CovFamily cov_family = CovFamily::AR1;
  int block_size = 50;              // BLOCK_CS only; the last block may truncate
  std::optional<double> eta;        // default 1 for c=4, 0.05 for c=100
  std::array<double, 4> theta{1.0, 1.0, 1.0, 1.0};  // w = t0 + t1 y1 + t2 y2 + t3 y10
  double w_noise_var = 3.0;
  std::array<double, 4> miss_coef{-1.0, -0.1, 2.0, -10.0};  // b0 + b1 y2 + b2 y3 + b3 w
  bool calibrate_intercept = true;  // solve b0 per dataset for the target rate
  double target_rate = 0.31;        // expected missing fraction when calibrating
  int reps = 200;
  int M = 30;
  std::uint64_t seed = 0;
  ImputeOptions impute;
  // Nearest-variable imputation from a single donor column is what gives the
  // KNN comparators their characteristic attenuation in the study tables.
  int knn_k = 1;

  double eta_value() const { return eta ? *eta : (c == 4 ? 1.0 : 0.05); }
  // Throws ConfigError listing every violation at once.
  void validate() const;
};

struct SimulatedDataset {
  Matrix Y;  // n x p; column 0 is y1 before masking
  Vector w;
  std::vector<bool> mask;  // true = y1 observed
  std::array<double, 4> truth;
  double b0 = 0.0;  // missingness intercept actually used
  double missing_fraction = 0.0;
};

// Covariance of (y2..yp). AR1: rho^|i-j|; BLOCK_CS: block-diagonal with 2 on
// the diagonal and 2*rho within blocks.
Matrix build_covariance(const SimConfig& config);

SimulatedDataset generate_dataset(const SimConfig& config, RngStream& rng);

// The incomplete matrix the imputation methods see: columns y1..yp plus w
// (fully observed), target y1. Masked y1 cells hold NaN.
IncompleteMatrix to_incomplete(const SimulatedDataset& ds);

// The analysis regression w ~ y1 + y2 + y10 over that column layout.
AnalysisSpec analysis_spec(const SimConfig& config);

struct MetricsRow {
  Method method = Method::GS;
  int p = 0;
  int c = 0;
  double rho = 0.0;
  CovFamily cov_family = CovFamily::AR1;
  double bias = 0.0;
  double se = 0.0;  // mean reported standard error
  double sd = 0.0;  // sample sd of the estimates
  double mse = 0.0;
  double cr = 0.0;  // 95% CI coverage of the true theta1
  int reps_used = 0;
};

struct StudyResult {
  std::vector<MetricsRow> rows;  // one per method, in the requested order
  SimConfig config;
  std::vector<Method> methods;
  std::vector<int> failures;  // per method, replicates excluded
  double mean_missing_fraction = 0.0;
};

// Runs every method over config.reps replicates. Replicate r draws its data
// and method randomness from stream r of the seed, so results are identical
// for any thread count. A method failing in more than 5% of replicates fails
// the whole run.
StudyResult run_study(const SimConfig& config, const std::vector<Method>& methods,
                      int threads = 1);

void write_results_csv(const std::vector<MetricsRow>& rows, const std::string& path);

// JSON document describing the run: config echo, methods, failure counts, and
// the interpretation flags the numbers depend on.
std::string run_meta_string(const StudyResult& result);

void write_run_meta(const StudyResult& result, const std::string& path);

}  // namespace himpute
