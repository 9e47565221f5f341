#pragma once

#include "himpute/types.hpp"

#include <vector>

namespace himpute {

// One complete-data analysis fit: point estimates, their covariance, and the
// residual degrees of freedom of the fit.
struct FitResult {
  Vector estimates;
  Matrix cov;
  double df = 0.0;
  bool converged = true;
};

// y on a design X that already contains any intercept column. Requires n > q
// and full column rank.
FitResult ols_fit(const Vector& y, const Matrix& X);

// Logistic regression by iteratively reweighted least squares, run to a
// gradient norm below `tol` or `max_iter` iterations. y must be 0/1 with both
// classes present. Perfect separation (diverging estimates) throws;
// non-convergence within the budget only clears `converged`.
FitResult logistic_fit(const Vector& y, const Matrix& X, int max_iter = 50,
                       double tol = 1e-8);

// Rubin-combined inference across M imputed-data fits, per coefficient.
struct PooledResult {
  Vector qbar;     // pooled estimates
  Vector W;        // within-imputation variance
  Vector B;        // between-imputation variance
  Vector T;        // total variance, W + (1 + 1/M) B
  Vector df;       // Rubin degrees of freedom (infinity when B = 0)
  Vector ci_low;   // 95% bounds
  Vector ci_high;
  Vector p_value;  // two-sided test of zero
  int M = 0;

  int q() const { return static_cast<int>(qbar.size()); }
};

// Pools the listed coefficients (all of them when `coefficients` is empty).
// Requires M >= 2 fits sharing the same coefficient count. B = 0 falls back to
// the normal reference distribution.
PooledResult rubin_pool(const std::vector<FitResult>& fits,
                        const std::vector<int>& coefficients = {});

// Single-fit 95% confidence interval and p-value from the t reference with the
// fit's own df; used for the non-MI methods so every method reports the same
// row shape.
PooledResult single_fit_inference(const FitResult& fit,
                                  const std::vector<int>& coefficients = {});

// Which regression to run on a (completed) data matrix: outcome column,
// predictor columns, and the family. An intercept is always prepended, so the
// fitted coefficient vector is [intercept, predictors...].
struct AnalysisSpec {
  int outcome = 0;
  std::vector<int> predictors;
  Family family = Family::LINEAR;

  void validate(int n_cols) const;
};

// Runs the spec's regression on all rows of `values`.
FitResult fit_analysis(const Matrix& values, const AnalysisSpec& spec);

// Same, restricted to the listed rows.
FitResult fit_analysis_rows(const Matrix& values, const std::vector<int>& rows,
                            const AnalysisSpec& spec);

}  // namespace himpute
