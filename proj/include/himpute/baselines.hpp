#pragma once

#include "himpute/analysis_pooling.hpp"
#include "himpute/imputation.hpp"

#include <optional>

namespace himpute {

// Analysis restricted to the rows whose target is observed.
FitResult cc_analyze(const IncompleteMatrix& data, const AnalysisSpec& spec);

// Standard parametric MI: Bayesian linear regression draws on ALL non-target
// columns except `exclude_cols`, no screening or reduction, ridge-stabilized.
// Deliberately fragile when the column count approaches or exceeds the
// complete-case count; that regime is the comparison of interest.
MIEnsemble mi_full(const IncompleteMatrix& data, int M, double ridge, RngStream rng,
                   const std::vector<int>& exclude_cols = {});

enum class KnnMode { SUBJECTS, VARIABLES };

// Single (improper) nearest-neighbour imputation of the target column.
// SUBJECTS: per missing row, inverse-distance weighted mean of the k nearest
// complete-case rows' targets, with Euclidean distance over the screened
// candidate columns. VARIABLES: inverse-distance weighted mean over the k
// candidate columns most correlated with the target on complete cases
// (distance 1 - |corr|), each column rescaled to the target's complete-case
// mean and sd. `exclude_cols` are removed from both candidate pools. Returns
// the completed values matrix.
Matrix knn_impute(const IncompleteMatrix& data, int k, KnnMode mode,
                  std::optional<int> screen_cap = std::nullopt,
                  const std::vector<int>& exclude_cols = {});

}  // namespace himpute
