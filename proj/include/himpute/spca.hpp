#pragma once

#include "himpute/reduction.hpp"

namespace himpute {

struct SpcaOptions {
  int max_iter = 500;
  double tol = 1e-7;  // max-norm change in the loading vector
};

// Sparse principal components by rank-one deflation with alternating
// soft-thresholded updates. X must be column-standardized. `variant` picks how
// the threshold is chosen per component:
//   SPCA_ST  threshold at (1 - sparsity) of the current gradient max-norm
//   SPCA_PMD threshold solving an L1 budget of 1 + sparsity * (sqrt(v) - 1)
//   SPCA_L   absolute threshold minimizing BIC over a log-spaced grid
//   SPCA_AL  like SPCA_L with per-coordinate adaptive weights
// sparsity = 1 disables thresholding for every variant, recovering ordinary
// principal components. The returned map has identity center/scale.
ReductionMap fit_spca(const Matrix& X, Method variant, int n_components,
                      double sparsity, const SpcaOptions& options = {});

// Applies the component-count rule to a fitted map's explained variance.
ComponentChoice select_n_components(const ReductionMap& map, ComponentRule rule);

}  // namespace himpute
