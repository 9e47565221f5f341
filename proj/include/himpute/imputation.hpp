#pragma once

#include "himpute/data_model.hpp"
#include "himpute/reduction.hpp"
#include "himpute/sdr.hpp"
#include "himpute/spca.hpp"
#include "himpute/stochastic.hpp"

#include <optional>
#include <vector>

namespace himpute {

// One posterior draw of the imputation model and the values it imputes.
struct ImputationDraw {
  Vector beta;   // intercept first, length d+1
  double sigma = 0.0;
  Vector imputed;  // length n2
  int m = 0;
  bool sigma_degenerate = false;  // SSE was zero; imputations are deterministic
};

// Posterior sampler for the Bayesian linear imputation model
//   S = W'W + ridge diag(W'W),  beta_hat = S^{-1} W'y,  W = [1, Z_obs]
//   sigma*^2 = SSE / chisq(n1 - q),  beta* = beta_hat + sigma* L zeta,
//   LL' = S^{-1},  imputed_i = [1, z_i] beta* + sigma* eps_i
// factorized once so repeated draws are cheap. Each draw consumes exactly one
// chi-square, q normals, and n2 normals from the stream. With clamp_df the
// chi-square df is floored at 1 and n1 <= q is tolerated (the full-model
// baseline runs overdetermined by design).
class BayesLinearSampler {
 public:
  BayesLinearSampler(const Vector& y, const Matrix& Z_obs, double ridge,
                     bool clamp_df = false);

  ImputationDraw draw(const Matrix& Z_mis, RngStream& rng, int m = 0) const;

  const Vector& beta_hat() const { return beta_hat_; }
  double sse() const { return sse_; }
  int df() const { return df_; }

 private:
  Eigen::LLT<Matrix> llt_;  // of S
  Vector beta_hat_;
  double sse_ = 0.0;
  int df_ = 0;
  int q_ = 0;
};

// Single posterior-predictive draw; requires n1 > d + 1 and ridge >= 0.
ImputationDraw draw_bayes_linear(const Vector& y, const Matrix& Z_obs,
                                 const Matrix& Z_mis, double ridge, RngStream& rng);

struct ImputeOptions {
  std::optional<int> screen_cap;  // extra upper bound on screened count
  double sparsity = 0.7;
  ComponentRule component_rule = ComponentRule::FIRST_ONE;
  SpcaOptions spca;
  SdrOptions sdr;
  double ridge = 1e-5;
  // Refit screening and reduction per draw instead of once per call; a
  // sensitivity knob, not the default behavior.
  bool refit_per_draw = false;
  // Columns kept out of screening and reduction but entered directly (raw)
  // into the imputation regression, e.g. a fully observed analysis outcome.
  // Indices into the IncompleteMatrix; must not include the target.
  std::vector<int> keep_cols;
};

struct ImputeDiagnostics {
  std::vector<int> screened_columns;  // original column indices, score order
  std::vector<int> kept_columns;      // direct design columns (opts.keep_cols)
  int v = 0;  // screened count
  int d = 0;  // components / directions used
  std::vector<Vector> betas;
  std::vector<double> sigmas;
  bool forced_d1 = false;
  bool ridge_repaired = false;
  bool truncated_components = false;
  bool any_sigma_degenerate = false;
  bool nothing_to_impute = false;  // input had no missing rows
};

struct MIEnsemble {
  std::vector<Matrix> datasets;  // M completed copies of the input values
  int M = 0;
  Method method_tag = Method::SPCA_ST;
  ImputeDiagnostics diagnostics;
};

// The three-step pipeline: screen candidates on complete cases, fit the
// requested reduction (sparse pca on all n rows of the screened columns; the
// inverse regressions on complete cases), project, then draw M imputations on
// substreams 0..M-1 of rng. Screening and reduction are fitted once per call
// unless opts.refit_per_draw is set. opts.keep_cols bypass both steps and are
// appended to the regression design unchanged. method must be one of the
// seven screening + reduction methods. A fully observed target yields M
// identical copies with diagnostics.nothing_to_impute set.
MIEnsemble multiply_impute(const IncompleteMatrix& data, Method method,
                           const ImputeOptions& opts, int M, RngStream rng);

}  // namespace himpute
