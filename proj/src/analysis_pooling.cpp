#include "himpute/analysis_pooling.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace himpute {

namespace {

// 97.5% quantile and two-sided p from the t reference, switching to the
// normal for infinite (or absurdly large) df.
double quantile_975(double df) {
  if (!std::isfinite(df) || df > 1e12) {
    return boost::math::quantile(boost::math::normal(), 0.975);
  }
  return boost::math::quantile(boost::math::students_t(df), 0.975);
}

double two_sided_p(double z, double df) {
  const double az = std::abs(z);
  if (!std::isfinite(df) || df > 1e12) {
    return 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal(), az));
  }
  return 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t(df), az));
}

std::vector<int> resolve_coefficients(int q, const std::vector<int>& coefficients) {
  if (coefficients.empty()) {
    std::vector<int> all(q);
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  for (const int j : coefficients) {
    if (j < 0 || j >= q) {
      throw std::invalid_argument("coefficient index " + std::to_string(j) +
                                  " out of range");
    }
  }
  return coefficients;
}

}  // namespace

FitResult ols_fit(const Vector& y, const Matrix& X) {
  const int n = static_cast<int>(X.rows());
  const int q = static_cast<int>(X.cols());
  if (y.size() != n) throw std::invalid_argument("ols_fit: y/X row mismatch");
  if (n <= q) throw std::invalid_argument("ols_fit: need n > q");

  Eigen::ColPivHouseholderQR<Matrix> qr(X);
  if (qr.rank() < q) throw std::runtime_error("ols_fit: design is rank deficient");

  FitResult fit;
  fit.estimates = qr.solve(y);
  const Vector resid = y - X * fit.estimates;
  fit.df = n - q;
  const double s2 = resid.squaredNorm() / fit.df;
  const Matrix xtx = X.transpose() * X;
  fit.cov = s2 * xtx.ldlt().solve(Matrix::Identity(q, q));
  return fit;
}

FitResult logistic_fit(const Vector& y, const Matrix& X, int max_iter, double tol) {
  const int n = static_cast<int>(X.rows());
  const int q = static_cast<int>(X.cols());
  if (y.size() != n) throw std::invalid_argument("logistic_fit: y/X row mismatch");
  if (n <= q) throw std::invalid_argument("logistic_fit: need n > q");

  bool has_zero = false;
  bool has_one = false;
  for (int i = 0; i < n; ++i) {
    if (y[i] == 0.0) {
      has_zero = true;
    } else if (y[i] == 1.0) {
      has_one = true;
    } else {
      throw std::invalid_argument("logistic_fit: y must be 0/1");
    }
  }
  if (!has_zero || !has_one) {
    throw std::invalid_argument("logistic_fit: both classes must be present");
  }

  FitResult fit;
  fit.estimates = Vector::Zero(q);
  fit.df = n - q;
  Matrix info(q, q);
  fit.converged = false;
  for (int iter = 0; iter < max_iter; ++iter) {
    const Vector eta = X * fit.estimates;
    const Vector prob = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
    const Vector weight = prob.array() * (1.0 - prob.array());
    const Vector grad = X.transpose() * (y - prob);
    info = X.transpose() * weight.asDiagonal() * X;
    if (grad.norm() < tol) {
      fit.converged = true;
      break;
    }
    const Eigen::LDLT<Matrix> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw std::runtime_error("logistic_fit: information matrix not positive definite");
    }
    fit.estimates += ldlt.solve(grad);
    if (fit.estimates.cwiseAbs().maxCoeff() > 1e3) {
      throw std::runtime_error(
          "logistic_fit: estimates diverged (perfect separation?)");
    }
  }
  fit.cov = info.ldlt().solve(Matrix::Identity(q, q));
  return fit;
}

PooledResult rubin_pool(const std::vector<FitResult>& fits,
                        const std::vector<int>& coefficients) {
  const int M = static_cast<int>(fits.size());
  if (M < 2) throw std::invalid_argument("pooling requires M >= 2");
  const int q_full = static_cast<int>(fits.front().estimates.size());
  for (const auto& fit : fits) {
    if (fit.estimates.size() != q_full || fit.cov.rows() != q_full ||
        fit.cov.cols() != q_full) {
      throw std::invalid_argument("rubin_pool: fits disagree on coefficient count");
    }
  }
  const auto selected = resolve_coefficients(q_full, coefficients);
  const int q = static_cast<int>(selected.size());

  PooledResult out;
  out.M = M;
  out.qbar.resize(q);
  out.W.resize(q);
  out.B.resize(q);
  out.T.resize(q);
  out.df.resize(q);
  out.ci_low.resize(q);
  out.ci_high.resize(q);
  out.p_value.resize(q);

  for (int s = 0; s < q; ++s) {
    const int j = selected[s];
    double qbar = 0.0;
    double W = 0.0;
    for (const auto& fit : fits) {
      qbar += fit.estimates[j];
      W += fit.cov(j, j);
    }
    qbar /= M;
    W /= M;
    double B = 0.0;
    for (const auto& fit : fits) {
      const double d = fit.estimates[j] - qbar;
      B += d * d;
    }
    B /= (M - 1);
    const double T = W + (1.0 + 1.0 / M) * B;
    double df = std::numeric_limits<double>::infinity();
    if (B > 0.0) {
      const double r = W / ((1.0 + 1.0 / M) * B);
      df = (M - 1) * (1.0 + r) * (1.0 + r);
    }
    const double se = std::sqrt(T);
    const double t975 = quantile_975(df);
    out.qbar[s] = qbar;
    out.W[s] = W;
    out.B[s] = B;
    out.T[s] = T;
    out.df[s] = df;
    out.ci_low[s] = qbar - t975 * se;
    out.ci_high[s] = qbar + t975 * se;
    out.p_value[s] = se > 0.0 ? two_sided_p(qbar / se, df) : (qbar == 0.0 ? 1.0 : 0.0);
  }
  return out;
}

void AnalysisSpec::validate(int n_cols) const {
  if (outcome < 0 || outcome >= n_cols) {
    throw std::invalid_argument("analysis outcome column out of range");
  }
  if (predictors.empty()) {
    throw std::invalid_argument("analysis needs at least one predictor");
  }
  std::vector<int> seen{outcome};
  for (const int j : predictors) {
    if (j < 0 || j >= n_cols) {
      throw std::invalid_argument("analysis predictor column out of range");
    }
    if (std::find(seen.begin(), seen.end(), j) != seen.end()) {
      throw std::invalid_argument("analysis columns must be distinct");
    }
    seen.push_back(j);
  }
}

FitResult fit_analysis_rows(const Matrix& values, const std::vector<int>& rows,
                            const AnalysisSpec& spec) {
  spec.validate(static_cast<int>(values.cols()));
  const int n = static_cast<int>(rows.size());
  const int q = static_cast<int>(spec.predictors.size()) + 1;
  Vector y(n);
  Matrix X(n, q);
  X.col(0).setOnes();
  for (int i = 0; i < n; ++i) {
    y[i] = values(rows[i], spec.outcome);
    for (int j = 0; j < q - 1; ++j) {
      X(i, j + 1) = values(rows[i], spec.predictors[j]);
    }
  }
  return spec.family == Family::LINEAR ? ols_fit(y, X) : logistic_fit(y, X);
}

FitResult fit_analysis(const Matrix& values, const AnalysisSpec& spec) {
  std::vector<int> rows(static_cast<std::size_t>(values.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  return fit_analysis_rows(values, rows, spec);
}

PooledResult single_fit_inference(const FitResult& fit,
                                  const std::vector<int>& coefficients) {
  const int q_full = static_cast<int>(fit.estimates.size());
  const auto selected = resolve_coefficients(q_full, coefficients);
  const int q = static_cast<int>(selected.size());

  PooledResult out;
  out.M = 1;
  out.qbar.resize(q);
  out.W.resize(q);
  out.B = Vector::Zero(q);
  out.T.resize(q);
  out.df.resize(q);
  out.ci_low.resize(q);
  out.ci_high.resize(q);
  out.p_value.resize(q);

  for (int s = 0; s < q; ++s) {
    const int j = selected[s];
    const double est = fit.estimates[j];
    const double var = fit.cov(j, j);
    const double se = std::sqrt(std::max(var, 0.0));
    const double t975 = quantile_975(fit.df);
    out.qbar[s] = est;
    out.W[s] = var;
    out.T[s] = var;
    out.df[s] = fit.df;
    out.ci_low[s] = est - t975 * se;
    out.ci_high[s] = est + t975 * se;
    out.p_value[s] = se > 0.0 ? two_sided_p(est / se, fit.df) : (est == 0.0 ? 1.0 : 0.0);
  }
  return out;
}

}  // namespace himpute
