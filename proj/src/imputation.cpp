#include "himpute/imputation.hpp"

#include "himpute/screening.hpp"

#include <cmath>

namespace himpute {

namespace {

// Substream ids under one multiply_impute call: draws m use ids 0..M-1, the
// dimension-test permutations live far above any plausible M.
constexpr std::uint64_t kPermutationStream = std::uint64_t{1} << 32;

Matrix select_submatrix(const Matrix& src, const std::vector<int>& rows,
                        const std::vector<int>& cols) {
  Matrix out(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          src(rows[i], cols[j]);
    }
  }
  return out;
}

struct FittedReduction {
  ReductionMap map;
  std::vector<int> screened_columns;
  bool forced_d1 = false;
  bool ridge_repaired = false;
  bool truncated_components = false;
};

FittedReduction fit_reduction(const IncompleteMatrix& data,
                              const CompleteCaseSplit& split, Method method,
                              const ImputeOptions& opts, RngStream perm_rng) {
  const ScreenResult screen = sis_screen(split, opts.screen_cap);
  FittedReduction out;
  out.screened_columns.reserve(screen.selected.size());
  for (const int j : screen.selected) {
    out.screened_columns.push_back(split.candidate_columns[j]);
  }

  if (is_spca(method)) {
    // Components use every row: the screened columns are fully observed, so
    // the incomplete-target rows still carry information about them.
    std::vector<int> all_rows(data.n_rows());
    for (int i = 0; i < data.n_rows(); ++i) all_rows[i] = i;
    const Matrix X_all = select_submatrix(data.values, all_rows, out.screened_columns);
    const Standardized std_cols = standardize_columns(X_all);
    const int v = static_cast<int>(X_all.cols());
    const int fit_k = opts.component_rule == ComponentRule::FIRST_ONE ? 1 : v;
    ReductionMap map = fit_spca(std_cols.X, method, fit_k, opts.sparsity, opts.spca);
    const ComponentChoice choice = select_n_components(map, opts.component_rule);
    out.truncated_components = choice.truncated;
    map = truncate_map(map, choice.d);
    map.center = std_cols.means;
    map.scale = std_cols.sds;
    out.map = std::move(map);
  } else if (is_sdr(method)) {
    std::vector<int> candidate_rows(split.X_obs.rows());
    for (int i = 0; i < static_cast<int>(candidate_rows.size()); ++i) {
      candidate_rows[i] = i;
    }
    const Matrix X_sel = select_submatrix(split.X_obs, candidate_rows, screen.selected);
    SdrFit fit;
    switch (method) {
      case Method::SDR_SIR:
        fit = fit_sir(split.y_obs, X_sel, perm_rng, opts.sdr);
        break;
      case Method::SDR_SAVE:
        fit = fit_save(split.y_obs, X_sel, perm_rng, opts.sdr);
        break;
      default:
        fit = fit_phd(split.y_obs, X_sel, opts.sdr);
        break;
    }
    out.forced_d1 = fit.forced_d1;
    out.ridge_repaired = fit.ridge_repaired;
    out.map = std::move(fit.map);
  } else {
    throw std::invalid_argument("multiply_impute: method has no reduction step");
  }
  out.map.source_columns = out.screened_columns;
  return out;
}

}  // namespace

BayesLinearSampler::BayesLinearSampler(const Vector& y, const Matrix& Z_obs,
                                       double ridge, bool clamp_df) {
  const int n1 = static_cast<int>(Z_obs.rows());
  const int d = static_cast<int>(Z_obs.cols());
  q_ = d + 1;
  if (y.size() != n1) throw std::invalid_argument("imputation: y/Z row mismatch");
  if (ridge < 0.0) throw std::invalid_argument("imputation: ridge must be >= 0");
  if (!clamp_df && n1 <= q_) {
    throw std::invalid_argument("imputation: insufficient complete cases (n1 <= d + 1)");
  }

  Matrix W(n1, q_);
  W.col(0).setOnes();
  W.rightCols(d) = Z_obs;
  Matrix S = W.transpose() * W;
  const Vector diag = S.diagonal();
  S.diagonal() += ridge * diag;

  llt_.compute(S);
  if (llt_.info() != Eigen::Success) {
    throw std::runtime_error("imputation: design is singular; increase the ridge");
  }
  beta_hat_ = llt_.solve(W.transpose() * y);
  sse_ = std::max((y - W * beta_hat_).squaredNorm(), 0.0);
  df_ = clamp_df ? std::max(n1 - q_, 1) : n1 - q_;
}

ImputationDraw BayesLinearSampler::draw(const Matrix& Z_mis, RngStream& rng,
                                        int m) const {
  if (Z_mis.cols() != q_ - 1) {
    throw std::invalid_argument("imputation: Z_mis column mismatch");
  }
  const int n2 = static_cast<int>(Z_mis.rows());

  ImputationDraw out;
  out.m = m;
  const double chi = rng.next_chisq(df_);
  out.sigma = std::sqrt(sse_ / chi);
  out.sigma_degenerate = !(out.sigma > 0.0);

  const Vector zeta = sample_std_normal(rng, q_);
  // L = U^{-1} with S = U'U satisfies LL' = S^{-1}.
  out.beta = beta_hat_ + out.sigma * llt_.matrixU().solve(zeta);

  out.imputed.resize(n2);
  for (int i = 0; i < n2; ++i) {
    out.imputed[i] = out.beta[0] + Z_mis.row(i).dot(out.beta.tail(q_ - 1)) +
                     out.sigma * rng.next_normal();
  }
  if (!out.beta.allFinite() || !out.imputed.allFinite() || !std::isfinite(out.sigma)) {
    throw std::runtime_error("imputation: draw produced non-finite values");
  }
  return out;
}

ImputationDraw draw_bayes_linear(const Vector& y, const Matrix& Z_obs,
                                 const Matrix& Z_mis, double ridge, RngStream& rng) {
  const BayesLinearSampler sampler(y, Z_obs, ridge, /*clamp_df=*/false);
  return sampler.draw(Z_mis, rng);
}

MIEnsemble multiply_impute(const IncompleteMatrix& data, Method method,
                           const ImputeOptions& opts, int M, RngStream rng) {
  data.validate();
  if (!is_proposed(method)) {
    throw std::invalid_argument("multiply_impute: '" + to_string(method) +
                                "' is not a screening + reduction method");
  }
  if (M < 2) throw std::invalid_argument("multiply_impute: M must be >= 2");
  validate_aux_columns(data, opts.keep_cols, "keep_cols");

  MIEnsemble ensemble;
  ensemble.M = M;
  ensemble.method_tag = method;

  if (data.n_missing() == 0) {
    ensemble.diagnostics.nothing_to_impute = true;
    ensemble.datasets.assign(M, data.values);
    return ensemble;
  }

  const CompleteCaseSplit split = split_complete_cases(data);
  // Screening and reduction see only the pooled candidates; kept columns skip
  // both and join the regression design as-is.
  const CompleteCaseSplit pool = opts.keep_cols.empty()
                                     ? split
                                     : drop_candidate_columns(split, opts.keep_cols);
  if (pool.candidate_columns.empty()) {
    throw std::invalid_argument("multiply_impute: keep_cols leaves no candidates");
  }
  const Matrix kept_obs = select_submatrix(data.values, split.obs_rows, opts.keep_cols);
  const Matrix kept_mis = select_submatrix(data.values, split.mis_rows, opts.keep_cols);

  const auto design = [&](const std::vector<int>& rows, const Matrix& kept,
                          const FittedReduction& red) {
    const Matrix Z = project(red.map,
                             select_submatrix(data.values, rows, red.screened_columns));
    Matrix out(Z.rows(), Z.cols() + kept.cols());
    out.leftCols(Z.cols()) = Z;
    out.rightCols(kept.cols()) = kept;
    return out;
  };

  const auto impute_with = [&](const FittedReduction& red, RngStream& draw_rng,
                               int m) {
    const Matrix Z_obs = design(split.obs_rows, kept_obs, red);
    const Matrix Z_mis = design(split.mis_rows, kept_mis, red);
    const BayesLinearSampler sampler(split.y_obs, Z_obs, opts.ridge);
    return sampler.draw(Z_mis, draw_rng, m);
  };

  const auto record_draw = [&](const ImputationDraw& draw) {
    Matrix completed = data.values;
    for (std::size_t i = 0; i < split.mis_rows.size(); ++i) {
      completed(split.mis_rows[i], data.target_index) =
          draw.imputed[static_cast<Eigen::Index>(i)];
    }
    ensemble.datasets.push_back(std::move(completed));
    ensemble.diagnostics.betas.push_back(draw.beta);
    ensemble.diagnostics.sigmas.push_back(draw.sigma);
    ensemble.diagnostics.any_sigma_degenerate |= draw.sigma_degenerate;
  };

  ensemble.diagnostics.kept_columns = opts.keep_cols;
  if (!opts.refit_per_draw) {
    const FittedReduction red =
        fit_reduction(data, pool, method, opts, rng.substream(kPermutationStream));
    for (int m = 0; m < M; ++m) {
      RngStream draw_rng = rng.substream(static_cast<std::uint64_t>(m));
      record_draw(impute_with(red, draw_rng, m));
    }
    ensemble.diagnostics.screened_columns = red.screened_columns;
    ensemble.diagnostics.v = static_cast<int>(red.screened_columns.size());
    ensemble.diagnostics.d = red.map.d();
    ensemble.diagnostics.forced_d1 = red.forced_d1;
    ensemble.diagnostics.ridge_repaired = red.ridge_repaired;
    ensemble.diagnostics.truncated_components = red.truncated_components;
  } else {
    for (int m = 0; m < M; ++m) {
      const FittedReduction red = fit_reduction(
          data, pool, method, opts,
          rng.substream(kPermutationStream + 1 + static_cast<std::uint64_t>(m)));
      RngStream draw_rng = rng.substream(static_cast<std::uint64_t>(m));
      record_draw(impute_with(red, draw_rng, m));
      if (m == 0) {
        ensemble.diagnostics.screened_columns = red.screened_columns;
        ensemble.diagnostics.v = static_cast<int>(red.screened_columns.size());
        ensemble.diagnostics.d = red.map.d();
      }
      ensemble.diagnostics.forced_d1 |= red.forced_d1;
      ensemble.diagnostics.ridge_repaired |= red.ridge_repaired;
      ensemble.diagnostics.truncated_components |= red.truncated_components;
    }
  }
  return ensemble;
}

}  // namespace himpute
