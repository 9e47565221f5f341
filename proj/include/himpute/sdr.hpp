#pragma once

#include "himpute/reduction.hpp"
#include "himpute/stochastic.hpp"

#include <vector>

namespace himpute {

struct SdrOptions {
  int nslices = 8;     // SIR/SAVE slice count (auto-reduced when n1 < 2*nslices)
  int n_perm = 200;    // permutation replicates for the dimension test
  double alpha = 0.05;
  int d_cap = 4;       // upper bound on the tested dimension
  bool response_based_phd = false;  // use y - ybar instead of OLS residuals
};

// A fitted inverse regression. `map` holds max(1, d_selected) directions over
// the input columns, Sigma-orthonormal and applied to raw (unstandardized)
// data; `eigenvalues` are all v kernel eigenvalues, non-increasing (by
// magnitude for PHD); `test_pvalues` are the sequential dimension-test
// p-values that were examined.
struct SdrFit {
  ReductionMap map;
  Vector eigenvalues;
  Vector test_pvalues;
  int d_selected = 0;
  int nslices = 0;  // actually used; 0 for PHD
  bool ridge_repaired = false;
  bool nslices_reduced = false;
  bool forced_d1 = false;  // d_selected was 0, kept the leading direction
};

// Sliced inverse regression on complete cases; d selected by permutation test.
SdrFit fit_sir(const Vector& y, const Matrix& X, RngStream rng,
               const SdrOptions& options = {});

// Sliced average variance estimation; d selected by permutation test.
SdrFit fit_save(const Vector& y, const Matrix& X, RngStream rng,
                const SdrOptions& options = {});

// Residual-based principal Hessian directions; d selected by the asymptotic
// chi-square test, sequentially at level options.alpha.
SdrFit fit_phd(const Vector& y, const Matrix& X, const SdrOptions& options = {});

// --- building blocks, exposed for direct verification ---

struct Whitened {
  Matrix Z;         // (X - mean) * inv_sqrt; sample covariance = identity
  Matrix inv_sqrt;  // symmetric inverse square root of the sample covariance
  Vector mean;
  bool repaired = false;  // diagonal ridge was added to a singular covariance
};

Whitened standardize_whiten(const Matrix& X);

// Near-equal slices of rows ordered by y; a tie on the boundary extends the
// slice so equal responses never split across slices.
std::vector<std::vector<int>> slice_indices(const Vector& y, int nslices);

// Kernel matrices on an already standardized Z (columns mean 0 by contract for
// the usual whitened input; the slice means are taken relative to the overall
// mean so arbitrary Z is still well-defined).
Matrix sir_kernel(const Vector& y, const Matrix& Z, int nslices);
Matrix save_kernel(const Vector& y, const Matrix& Z, int nslices);
Matrix phd_kernel(const Vector& y, const Matrix& Z, bool response_based = false);

enum class SdrKernel { SIR, SAVE };

struct PermutationTest {
  int d = 0;
  Vector pvalues;  // one per examined k, starting at k = 0
};

// Sequential permutation test for the dimension: T_k = n * sum of the
// smallest v-k kernel eigenvalues, null distribution from permuting y with a
// fixed substream per permutation index. d is the first k with p > alpha,
// capped at min(v, nslices-1, d_cap). Requires n_perm >= 100.
PermutationTest permutation_test_d(SdrKernel kind, const Vector& y, const Matrix& Z,
                                   int nslices, int n_perm, double alpha, int d_cap,
                                   RngStream rng);

}  // namespace himpute
