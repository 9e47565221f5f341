#include "himpute/spca.hpp"

#include "himpute/data_model.hpp"

#include <cmath>
#include <functional>
#include <limits>

namespace himpute {

namespace {

Vector soft_threshold(const Vector& g, const Vector& lam) {
  return g.array().sign() * (g.array().abs() - lam.array()).max(0.0);
}

Vector leading_right_singular(const Matrix& X) {
  Eigen::BDCSVD<Matrix> svd(X, Eigen::ComputeThinV);
  return svd.matrixV().col(0);
}

// Alternates u <- X w / |X w| and w <- S(X^T u, lambda(g)) / |.| until the
// loading stabilizes. lambda_of_g returns the per-coordinate threshold vector
// for the current gradient g = X^T u.
Vector alternate(const Matrix& Xd, Vector w,
                 const std::function<Vector(const Vector&)>& lambda_of_g,
                 const SpcaOptions& options) {
  for (int iter = 0; iter < options.max_iter; ++iter) {
    const Vector Xw = Xd * w;
    const double norm_xw = Xw.norm();
    if (!(norm_xw > 0.0)) {
      throw std::runtime_error("sparse pca: component update hit the null space");
    }
    const Vector u = Xw / norm_xw;
    const Vector g = Xd.transpose() * u;
    Vector w_new = soft_threshold(g, lambda_of_g(g));
    const double norm_w = w_new.norm();
    if (!(norm_w > 0.0)) {
      throw std::runtime_error(
          "sparse pca: threshold removed every loading; lower the sparsity level");
    }
    w_new /= norm_w;
    const double delta = (w_new - w).cwiseAbs().maxCoeff();
    w = w_new;
    if (delta < options.tol) break;
  }
  return w;
}

// Smallest threshold whose normalized soft-thresholded solution satisfies the
// L1 budget. The budget is always reachable: near |g|_max only the largest
// coordinate survives, giving an L1/L2 ratio of 1.
double pmd_lambda(const Vector& g, double budget) {
  const auto l1_ratio = [&](double lam) {
    const Vector w = soft_threshold(g, Vector::Constant(g.size(), lam));
    const double n2 = w.norm();
    return n2 > 0.0 ? w.lpNorm<1>() / n2 : 1.0;
  };
  if (l1_ratio(0.0) <= budget) return 0.0;
  double lo = 0.0;
  double hi = g.cwiseAbs().maxCoeff();
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (l1_ratio(mid) > budget ? lo : hi) = mid;
  }
  return hi;
}

// 20-point log-spaced grid used by the BIC-tuned variants.
std::vector<double> lambda_grid(double lam_max) {
  std::vector<double> grid;
  const double lo = 1e-3 * lam_max;
  const double hi = 0.9 * lam_max;
  const int points = 20;
  for (int t = 0; t < points; ++t) {
    grid.push_back(lo * std::pow(hi / lo, static_cast<double>(t) / (points - 1)));
  }
  return grid;
}

struct GridFit {
  Vector w;
  double bic = 0.0;
};

// Fits the component at one fixed threshold vector and scores it by BIC of the
// rank-one reconstruction: n*v*ln(RSS/(n*v)) + ln(n*v)*nnz.
GridFit fit_at_threshold(const Matrix& Xd, const Vector& w0, const Vector& lam,
                         const SpcaOptions& options) {
  GridFit fit;
  fit.w = alternate(
      Xd, w0, [&](const Vector&) { return lam; }, options);
  const double nv = static_cast<double>(Xd.rows()) * static_cast<double>(Xd.cols());
  const double rss =
      std::max(Xd.squaredNorm() - (Xd * fit.w).squaredNorm(), 1e-300);
  const int nnz = static_cast<int>((fit.w.array() != 0.0).count());
  fit.bic = nv * std::log(rss / nv) + std::log(nv) * nnz;
  return fit;
}

Vector best_over_grid(const Matrix& Xd, const Vector& w0, const Vector& weights,
                      double sparsity, const SpcaOptions& options) {
  const Vector u0 = (Xd * w0).normalized();
  const Vector g0 = Xd.transpose() * u0;
  if (sparsity == 1.0) {
    return alternate(
        Xd, w0, [&](const Vector&) { return Vector::Zero(Xd.cols()); }, options);
  }
  const double lam_max = (g0.array().abs() / weights.array()).maxCoeff();
  Vector best_w;
  double best_bic = std::numeric_limits<double>::infinity();
  for (const double lam : lambda_grid(lam_max)) {
    const GridFit fit = fit_at_threshold(Xd, w0, lam * weights, options);
    if (fit.bic < best_bic) {
      best_bic = fit.bic;
      best_w = fit.w;
    }
  }
  return best_w;
}

Vector fit_component(const Matrix& Xd, Method variant, double sparsity,
                     const SpcaOptions& options) {
  const auto v = Xd.cols();
  const Vector w0 = leading_right_singular(Xd);
  switch (variant) {
    case Method::SPCA_ST:
      return alternate(
          Xd, w0,
          [&](const Vector& g) {
            return Vector::Constant(v, (1.0 - sparsity) * g.cwiseAbs().maxCoeff());
          },
          options);
    case Method::SPCA_PMD: {
      const double budget = 1.0 + sparsity * (std::sqrt(static_cast<double>(v)) - 1.0);
      return alternate(
          Xd, w0,
          [&](const Vector& g) {
            return Vector::Constant(v, pmd_lambda(g, budget));
          },
          options);
    }
    case Method::SPCA_L:
      return best_over_grid(Xd, w0, Vector::Ones(v), sparsity, options);
    case Method::SPCA_AL: {
      // Adaptive weights from the unpenalized leading loading of the current
      // deflated matrix; normalized so the strongest coordinate has weight 1.
      Vector weights =
          (1.0 / w0.array().abs().max(1e-8)).min(1e8).matrix();
      weights /= weights.minCoeff();
      return best_over_grid(Xd, w0, weights, sparsity, options);
    }
    default:
      throw std::invalid_argument("fit_spca: not a sparse pca variant");
  }
}

}  // namespace

ReductionMap fit_spca(const Matrix& X, Method variant, int n_components,
                      double sparsity, const SpcaOptions& options) {
  if (!is_spca(variant)) {
    throw std::invalid_argument("fit_spca: not a sparse pca variant");
  }
  const int n = static_cast<int>(X.rows());
  const int v = static_cast<int>(X.cols());
  if (n < 3 || v < 1) throw std::invalid_argument("fit_spca: X too small");
  if (n_components < 1 || n_components > v) {
    throw std::invalid_argument("fit_spca: n_components must be in [1, v]");
  }
  if (!(sparsity > 0.0) || sparsity > 1.0) {
    throw std::invalid_argument("fit_spca: sparsity must be in (0, 1]");
  }
  for (int j = 0; j < v; ++j) {
    const Vector col = X.col(j);
    if (std::abs(col.mean()) > 1e-6 || std::abs(column_sd(col) - 1.0) > 1e-3) {
      throw std::invalid_argument("fit_spca: X must be column-standardized");
    }
  }

  const double total_sq = X.squaredNorm();
  Matrix Xd = X;
  std::vector<Vector> loadings;
  std::vector<double> explained;
  for (int k = 0; k < n_components; ++k) {
    // Natural exhaustion: nothing left to explain after deflation.
    if (Xd.squaredNorm() < 1e-12 * total_sq) break;
    Vector w = fit_component(Xd, variant, sparsity, options);

    // Sign convention: the largest-magnitude loading is positive.
    int max_idx = 0;
    w.cwiseAbs().maxCoeff(&max_idx);
    if (w[max_idx] < 0.0) w = -w;

    Vector u = Xd * w;
    const double sigma = u.norm();
    if (!(sigma > 0.0)) {
      throw std::runtime_error("sparse pca: degenerate component");
    }
    u /= sigma;
    Xd -= sigma * u * w.transpose();

    const Vector scores = X * w;
    explained.push_back((scores.array() - scores.mean()).square().sum() /
                        (n - 1) / (total_sq / (n - 1)));
    loadings.push_back(std::move(w));
  }

  ReductionMap map;
  map.method = variant;
  map.loadings.resize(static_cast<int>(loadings.size()), v);
  map.explained_variance.resize(static_cast<int>(loadings.size()));
  for (std::size_t k = 0; k < loadings.size(); ++k) {
    map.loadings.row(static_cast<int>(k)) = loadings[k].transpose();
    map.explained_variance[static_cast<int>(k)] = explained[k];
  }
  map.center = Vector::Zero(v);
  map.scale = Vector::Ones(v);
  return map;
}

ComponentChoice select_n_components(const ReductionMap& map, ComponentRule rule) {
  if (map.d() < 1) throw std::invalid_argument("select_n_components: empty map");
  if (rule == ComponentRule::FIRST_ONE) return {1, false};
  const double target = rule == ComponentRule::VAR60 ? 0.60 : 0.80;
  if (map.explained_variance.size() != map.d()) {
    throw std::invalid_argument(
        "select_n_components: map lacks explained variance (variance rules need a "
        "sparse pca fit)");
  }
  double cum = 0.0;
  for (int k = 0; k < map.d(); ++k) {
    cum += map.explained_variance[k];
    if (cum >= target) return {k + 1, false};
  }
  return {map.d(), true};
}

}  // namespace himpute
