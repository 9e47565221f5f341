#include "himpute/baselines.hpp"

#include "himpute/screening.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace himpute {

FitResult cc_analyze(const IncompleteMatrix& data, const AnalysisSpec& spec) {
  const CompleteCaseSplit split = split_complete_cases(data);
  return fit_analysis_rows(data.values, split.obs_rows, spec);
}

MIEnsemble mi_full(const IncompleteMatrix& data, int M, double ridge, RngStream rng,
                   const std::vector<int>& exclude_cols) {
  data.validate();
  if (M < 2) throw std::invalid_argument("mi_full: M must be >= 2");
  validate_aux_columns(data, exclude_cols, "exclude_cols");

  MIEnsemble ensemble;
  ensemble.M = M;
  ensemble.method_tag = Method::MI_FULL;

  if (data.n_missing() == 0) {
    ensemble.diagnostics.nothing_to_impute = true;
    ensemble.datasets.assign(M, data.values);
    return ensemble;
  }

  const CompleteCaseSplit full_split = split_complete_cases(data);
  const CompleteCaseSplit split =
      exclude_cols.empty() ? full_split
                           : drop_candidate_columns(full_split, exclude_cols);
  if (split.candidate_columns.empty()) {
    throw std::invalid_argument("mi_full: exclude_cols leaves no predictors");
  }
  const BayesLinearSampler sampler(split.y_obs, split.X_obs, ridge,
                                   /*clamp_df=*/true);
  ensemble.diagnostics.screened_columns = split.candidate_columns;
  ensemble.diagnostics.v = static_cast<int>(split.candidate_columns.size());
  ensemble.diagnostics.d = ensemble.diagnostics.v;

  for (int m = 0; m < M; ++m) {
    RngStream draw_rng = rng.substream(static_cast<std::uint64_t>(m));
    const ImputationDraw draw = sampler.draw(split.X_mis, draw_rng, m);
    Matrix completed = data.values;
    for (std::size_t i = 0; i < split.mis_rows.size(); ++i) {
      completed(split.mis_rows[i], data.target_index) =
          draw.imputed[static_cast<Eigen::Index>(i)];
    }
    ensemble.datasets.push_back(std::move(completed));
    ensemble.diagnostics.betas.push_back(draw.beta);
    ensemble.diagnostics.sigmas.push_back(draw.sigma);
    ensemble.diagnostics.any_sigma_degenerate |= draw.sigma_degenerate;
  }
  return ensemble;
}

namespace {

// k smallest distances, ties broken by the original order.
std::vector<int> k_nearest(const std::vector<double>& dist, int k) {
  std::vector<int> order(dist.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dist[a] < dist[b]; });
  order.resize(k);
  return order;
}

Vector inverse_distance_weights(const std::vector<double>& dist,
                                const std::vector<int>& picked) {
  Vector w(static_cast<Eigen::Index>(picked.size()));
  for (std::size_t j = 0; j < picked.size(); ++j) {
    w[static_cast<Eigen::Index>(j)] = 1.0 / (dist[picked[j]] + 1e-12);
  }
  return w / w.sum();
}

Matrix knn_subjects(const IncompleteMatrix& data, int k,
                    std::optional<int> screen_cap,
                    const std::vector<int>& exclude_cols) {
  const CompleteCaseSplit full_split = split_complete_cases(data);
  const CompleteCaseSplit split =
      exclude_cols.empty() ? full_split
                           : drop_candidate_columns(full_split, exclude_cols);
  if (split.candidate_columns.empty()) {
    throw std::invalid_argument("knn_impute: exclude_cols leaves no candidates");
  }
  if (k > split.n1()) {
    throw std::invalid_argument("knn_impute: fewer than k complete-case donors");
  }
  const ScreenResult screen = sis_screen(split, screen_cap);

  Matrix completed = data.values;
  std::vector<double> dist(static_cast<std::size_t>(split.n1()));
  for (int i = 0; i < split.n2(); ++i) {
    for (int r = 0; r < split.n1(); ++r) {
      double ss = 0.0;
      for (const int j : screen.selected) {
        const double diff = split.X_mis(i, j) - split.X_obs(r, j);
        ss += diff * diff;
      }
      dist[static_cast<std::size_t>(r)] = std::sqrt(ss);
    }
    const auto picked = k_nearest(dist, k);
    const Vector weights = inverse_distance_weights(dist, picked);
    double value = 0.0;
    for (std::size_t j = 0; j < picked.size(); ++j) {
      value += weights[static_cast<Eigen::Index>(j)] * split.y_obs[picked[j]];
    }
    completed(split.mis_rows[i], data.target_index) = value;
  }
  return completed;
}

Matrix knn_variables(const IncompleteMatrix& data, int k,
                     const std::vector<int>& exclude_cols) {
  const CompleteCaseSplit full_split = split_complete_cases(data);
  const CompleteCaseSplit split =
      exclude_cols.empty() ? full_split
                           : drop_candidate_columns(full_split, exclude_cols);
  if (split.candidate_columns.empty()) {
    throw std::invalid_argument("knn_impute: exclude_cols leaves no candidates");
  }
  const double target_mean = column_mean(split.y_obs);
  const double target_sd = column_sd(split.y_obs);
  if (!(target_sd > 0.0)) {
    throw std::invalid_argument("knn_impute: target is constant on complete cases");
  }

  // Candidate columns with spread on the complete cases; constants carry no
  // correlation signal and cannot be rescaled.
  struct Candidate {
    int column;  // index into the split's candidate columns
    double dist;
    double mean;
    double sd;
  };
  std::vector<Candidate> candidates;
  for (int j = 0; j < static_cast<int>(split.X_obs.cols()); ++j) {
    const Vector col = split.X_obs.col(j);
    const double sd = column_sd(col);
    if (!(sd > 0.0)) continue;
    candidates.push_back(
        {j, 1.0 - std::abs(pearson(col, split.y_obs)), col.mean(), sd});
  }
  if (static_cast<int>(candidates.size()) < k) {
    throw std::invalid_argument("knn_impute: fewer than k usable candidate columns");
  }

  std::vector<double> dist(candidates.size());
  for (std::size_t j = 0; j < candidates.size(); ++j) dist[j] = candidates[j].dist;
  const auto picked = k_nearest(dist, k);
  const Vector weights = inverse_distance_weights(dist, picked);

  Matrix completed = data.values;
  for (int i = 0; i < split.n2(); ++i) {
    double value = 0.0;
    for (std::size_t j = 0; j < picked.size(); ++j) {
      const Candidate& cand = candidates[static_cast<std::size_t>(picked[j])];
      const double rescaled =
          (split.X_mis(i, cand.column) - cand.mean) / cand.sd * target_sd + target_mean;
      value += weights[static_cast<Eigen::Index>(j)] * rescaled;
    }
    completed(split.mis_rows[i], data.target_index) = value;
  }
  return completed;
}

}  // namespace

Matrix knn_impute(const IncompleteMatrix& data, int k, KnnMode mode,
                  std::optional<int> screen_cap,
                  const std::vector<int>& exclude_cols) {
  data.validate();
  if (k < 1) throw std::invalid_argument("knn_impute: k must be >= 1");
  validate_aux_columns(data, exclude_cols, "exclude_cols");
  if (data.n_missing() == 0) return data.values;
  return mode == KnnMode::SUBJECTS
             ? knn_subjects(data, k, screen_cap, exclude_cols)
             : knn_variables(data, k, exclude_cols);
}

}  // namespace himpute
