#include "himpute/sdr.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace himpute {

namespace {

// Eigen-decomposition of a symmetric matrix, eigenvalues descending.
void sym_eigen_desc(const Matrix& M, Vector& values, Matrix& vectors) {
  const Matrix sym = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eigendecomposition failed");
  }
  const auto v = sym.rows();
  values.resize(v);
  vectors.resize(v, v);
  for (Eigen::Index k = 0; k < v; ++k) {
    values[k] = solver.eigenvalues()[v - 1 - k];
    vectors.col(k) = solver.eigenvectors().col(v - 1 - k);
  }
}

Vector shuffled(const Vector& y, RngStream rng) {
  Vector out = y;
  for (Eigen::Index i = out.size() - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(rng.next_below(i + 1));
    std::swap(out[i], out[j]);
  }
  return out;
}

Vector kernel_eigenvalues(SdrKernel kind, const Vector& y, const Matrix& Z,
                          int nslices) {
  const Matrix M =
      kind == SdrKernel::SIR ? sir_kernel(y, Z, nslices) : save_kernel(y, Z, nslices);
  Vector values;
  Matrix vectors;
  sym_eigen_desc(M, values, vectors);
  return values;
}

struct SlicedKernelFit {
  Vector eigenvalues;
  Matrix eigenvectors;
  int nslices = 0;
  bool nslices_reduced = false;
};

SlicedKernelFit fit_sliced_kernel(SdrKernel kind, const Vector& y, const Matrix& Z,
                                  int nslices) {
  const int n1 = static_cast<int>(y.size());
  if (nslices < 2) throw std::invalid_argument("nslices must be >= 2");
  SlicedKernelFit fit;
  fit.nslices = nslices;
  // Keep every slice at least 2 rows on average; required by SAVE's
  // within-slice covariance and by the SIR asymptotics.
  if (n1 < 2 * fit.nslices) {
    fit.nslices = std::max(2, n1 / 2);
    fit.nslices_reduced = true;
  }
  const Matrix M = kind == SdrKernel::SIR ? sir_kernel(y, Z, fit.nslices)
                                          : save_kernel(y, Z, fit.nslices);
  sym_eigen_desc(M, fit.eigenvalues, fit.eigenvectors);
  return fit;
}

SdrFit fit_sliced(SdrKernel kind, Method method, const Vector& y, const Matrix& X,
                  RngStream rng, const SdrOptions& options) {
  if (y.size() != X.rows()) throw std::invalid_argument("sdr: y/X row mismatch");
  if (y.size() < 6) throw std::invalid_argument("sdr: need at least 6 rows");

  const Whitened wh = standardize_whiten(X);
  const SlicedKernelFit kfit = fit_sliced_kernel(kind, y, wh.Z, options.nslices);

  SdrFit fit;
  fit.nslices = kfit.nslices;
  fit.nslices_reduced = kfit.nslices_reduced;
  fit.ridge_repaired = wh.repaired;
  fit.eigenvalues = kfit.eigenvalues;

  const PermutationTest test =
      permutation_test_d(kind, y, wh.Z, kfit.nslices, options.n_perm, options.alpha,
                         options.d_cap, rng);
  fit.d_selected = test.d;
  fit.test_pvalues = test.pvalues;
  fit.forced_d1 = fit.d_selected == 0;

  const int v = static_cast<int>(X.cols());
  const int d = std::max(1, fit.d_selected);
  fit.map.method = method;
  fit.map.loadings.resize(d, v);
  for (int k = 0; k < d; ++k) {
    fit.map.loadings.row(k) = (wh.inv_sqrt * kfit.eigenvectors.col(k)).transpose();
  }
  fit.map.center = Vector::Zero(v);
  fit.map.scale = Vector::Ones(v);
  return fit;
}

}  // namespace

Whitened standardize_whiten(const Matrix& X) {
  const int n = static_cast<int>(X.rows());
  const int v = static_cast<int>(X.cols());
  if (n < 3 || v < 1) throw std::invalid_argument("standardize_whiten: X too small");

  Whitened out;
  out.mean = X.colwise().mean();
  Matrix centered = X.rowwise() - out.mean.transpose();
  Matrix S = centered.transpose() * centered / (n - 1);

  const auto decompose = [&](const Matrix& cov) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
    if (solver.info() != Eigen::Success) {
      throw std::runtime_error("covariance eigendecomposition failed");
    }
    return solver;
  };

  auto solver = decompose(S);
  const double scale = std::max(S.trace() / v, 1e-300);
  if (solver.eigenvalues().minCoeff() <= 1e-10 * scale) {
    S += (1e-8 * S.trace() / v) * Matrix::Identity(v, v);
    solver = decompose(S);
    out.repaired = true;
    if (solver.eigenvalues().minCoeff() <= 0.0) {
      throw std::runtime_error("covariance is singular beyond ridge repair");
    }
  }
  out.inv_sqrt = solver.eigenvectors() *
                 solver.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                 solver.eigenvectors().transpose();
  out.Z = centered * out.inv_sqrt;
  return out;
}

std::vector<std::vector<int>> slice_indices(const Vector& y, int nslices) {
  const int n = static_cast<int>(y.size());
  if (nslices < 1) throw std::invalid_argument("nslices must be >= 1");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return y[a] < y[b]; });

  std::vector<std::vector<int>> slices;
  int pos = 0;
  while (pos < n && static_cast<int>(slices.size()) < nslices) {
    const int remaining_slices = nslices - static_cast<int>(slices.size());
    int end = pos + (n - pos + remaining_slices - 1) / remaining_slices;
    while (end < n && y[order[end - 1]] == y[order[end]]) ++end;
    slices.emplace_back(order.begin() + pos, order.begin() + end);
    pos = end;
  }
  if (pos < n) {
    slices.back().insert(slices.back().end(), order.begin() + pos, order.end());
  }
  return slices;
}

Matrix sir_kernel(const Vector& y, const Matrix& Z, int nslices) {
  if (y.size() != Z.rows()) throw std::invalid_argument("sir_kernel: size mismatch");
  const int n = static_cast<int>(Z.rows());
  const int v = static_cast<int>(Z.cols());
  const Vector overall = Z.colwise().mean();
  Matrix M = Matrix::Zero(v, v);
  for (const auto& slice : slice_indices(y, nslices)) {
    Vector mean = Vector::Zero(v);
    for (const int row : slice) mean += Z.row(row).transpose();
    mean = mean / static_cast<double>(slice.size()) - overall;
    M += (static_cast<double>(slice.size()) / n) * mean * mean.transpose();
  }
  return M;
}

Matrix save_kernel(const Vector& y, const Matrix& Z, int nslices) {
  if (y.size() != Z.rows()) throw std::invalid_argument("save_kernel: size mismatch");
  const int n = static_cast<int>(Z.rows());
  const int v = static_cast<int>(Z.cols());

  auto slices = slice_indices(y, nslices);
  // A slice can end up with a single row when ties stretch a boundary; its
  // covariance is undefined, so fold it into the neighbouring slice.
  for (std::size_t h = 0; h < slices.size();) {
    if (slices[h].size() >= 2 || slices.size() == 1) {
      ++h;
      continue;
    }
    const std::size_t neighbour = h == 0 ? 1 : h - 1;
    slices[neighbour].insert(slices[neighbour].end(), slices[h].begin(),
                             slices[h].end());
    slices.erase(slices.begin() + static_cast<std::ptrdiff_t>(h));
    if (neighbour < h) ++h;
  }

  const Matrix I = Matrix::Identity(v, v);
  Matrix M = Matrix::Zero(v, v);
  for (const auto& slice : slices) {
    const int nh = static_cast<int>(slice.size());
    Matrix rows(nh, v);
    for (int i = 0; i < nh; ++i) rows.row(i) = Z.row(slice[i]);
    const Matrix centered = rows.rowwise() - rows.colwise().mean();
    Matrix Vh = nh >= 2 ? Matrix(centered.transpose() * centered / (nh - 1))
                        : Matrix(Matrix::Zero(v, v));
    const Matrix diff = I - Vh;
    M += (static_cast<double>(nh) / n) * diff * diff;
  }
  return M;
}

Matrix phd_kernel(const Vector& y, const Matrix& Z, bool response_based) {
  if (y.size() != Z.rows()) throw std::invalid_argument("phd_kernel: size mismatch");
  const int n = static_cast<int>(Z.rows());
  const int v = static_cast<int>(Z.cols());
  Vector e;
  if (response_based) {
    e = y.array() - y.mean();
  } else {
    Matrix design(n, v + 1);
    design.col(0).setOnes();
    design.rightCols(v) = Z;
    const Vector beta = design.colPivHouseholderQr().solve(y);
    e = y - design * beta;
  }
  Matrix M = Matrix::Zero(v, v);
  for (int i = 0; i < n; ++i) {
    M += e[i] * Z.row(i).transpose() * Z.row(i);
  }
  return M / n;
}

PermutationTest permutation_test_d(SdrKernel kind, const Vector& y, const Matrix& Z,
                                   int nslices, int n_perm, double alpha, int d_cap,
                                   RngStream rng) {
  if (n_perm < 100) throw std::invalid_argument("permutation test needs n_perm >= 100");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
  const int n1 = static_cast<int>(y.size());
  const int v = static_cast<int>(Z.cols());
  const int cap = std::min({v, nslices - 1, d_cap});

  const Vector obs = kernel_eigenvalues(kind, y, Z, nslices);
  std::vector<Vector> perm(static_cast<std::size_t>(n_perm));
  for (int t = 0; t < n_perm; ++t) {
    perm[t] = kernel_eigenvalues(kind, shuffled(y, rng.substream(t)), Z, nslices);
  }

  PermutationTest result;
  std::vector<double> pvalues;
  int d = cap;
  for (int k = 0; k < cap; ++k) {
    const double t_obs = n1 * obs.tail(v - k).sum();
    int count = 0;
    for (const auto& evals : perm) {
      if (n1 * evals.tail(v - k).sum() >= t_obs) ++count;
    }
    const double p = (1.0 + count) / (n_perm + 1.0);
    pvalues.push_back(p);
    if (p > alpha) {
      d = k;
      break;
    }
  }
  result.d = d;
  result.pvalues = Eigen::Map<const Vector>(pvalues.data(),
                                            static_cast<Eigen::Index>(pvalues.size()));
  return result;
}

SdrFit fit_sir(const Vector& y, const Matrix& X, RngStream rng,
               const SdrOptions& options) {
  return fit_sliced(SdrKernel::SIR, Method::SDR_SIR, y, X, rng, options);
}

SdrFit fit_save(const Vector& y, const Matrix& X, RngStream rng,
                const SdrOptions& options) {
  return fit_sliced(SdrKernel::SAVE, Method::SDR_SAVE, y, X, rng, options);
}

SdrFit fit_phd(const Vector& y, const Matrix& X, const SdrOptions& options) {
  if (y.size() != X.rows()) throw std::invalid_argument("sdr: y/X row mismatch");
  const int n1 = static_cast<int>(y.size());
  const int v = static_cast<int>(X.cols());
  if (n1 <= v + 2) {
    throw std::invalid_argument("phd needs n1 > v + 2");
  }

  const Whitened wh = standardize_whiten(X);
  const Matrix M = phd_kernel(y, wh.Z, options.response_based_phd);
  Vector values;
  Matrix vectors;
  sym_eigen_desc(M, values, vectors);

  // Order by magnitude; the kernel is signed.
  std::vector<int> order(v);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(values[a]) > std::abs(values[b]);
  });

  SdrFit fit;
  fit.ridge_repaired = wh.repaired;
  fit.eigenvalues.resize(v);
  for (int k = 0; k < v; ++k) fit.eigenvalues[k] = values[order[k]];

  // Sequential asymptotic test: under dimension <= k the trailing eigenvalues
  // vanish and n * sum(lambda^2) / (2 var(e)) is chi-square.
  Vector e;
  if (options.response_based_phd) {
    e = y.array() - y.mean();
  } else {
    Matrix design(n1, v + 1);
    design.col(0).setOnes();
    design.rightCols(v) = wh.Z;
    const Vector beta = design.colPivHouseholderQr().solve(y);
    e = y - design * beta;
  }
  const double var_e = e.squaredNorm() / n1;
  if (!(var_e > 0.0)) {
    fit.d_selected = 0;
    fit.test_pvalues = Vector::Zero(0);
  } else {
    std::vector<double> pvalues;
    int d = v;
    for (int k = 0; k < v; ++k) {
      double tail_sq = 0.0;
      for (int j = k; j < v; ++j) tail_sq += fit.eigenvalues[j] * fit.eigenvalues[j];
      const double stat = n1 * tail_sq / (2.0 * var_e);
      const double df = 0.5 * static_cast<double>(v - k) * (v - k + 1);
      const boost::math::chi_squared chisq(df);
      const double p = boost::math::cdf(boost::math::complement(chisq, stat));
      pvalues.push_back(p);
      if (p > options.alpha) {
        d = k;
        break;
      }
    }
    fit.d_selected = d;
    fit.test_pvalues = Eigen::Map<const Vector>(
        pvalues.data(), static_cast<Eigen::Index>(pvalues.size()));
  }

  fit.forced_d1 = fit.d_selected == 0;
  const int d = std::max(1, fit.d_selected);
  fit.map.method = Method::SDR_PHD;
  fit.map.loadings.resize(d, v);
  for (int k = 0; k < d; ++k) {
    fit.map.loadings.row(k) = (wh.inv_sqrt * vectors.col(order[k])).transpose();
  }
  fit.map.center = Vector::Zero(v);
  fit.map.scale = Vector::Ones(v);
  return fit;
}

}  // namespace himpute
