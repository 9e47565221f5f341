#include "himpute/screening.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace himpute {

double pearson(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: size mismatch");
  if (x.size() < 3) throw std::invalid_argument("pearson: need at least 3 points");
  const double mx = x.mean();
  const double my = y.mean();
  const Eigen::ArrayXd dx = x.array() - mx;
  const Eigen::ArrayXd dy = y.array() - my;
  const double sxx = (dx * dx).sum();
  const double syy = (dy * dy).sum();
  if (!(sxx > 0.0)) throw std::invalid_argument("pearson: first argument is constant");
  if (!(syy > 0.0)) throw std::invalid_argument("pearson: second argument is constant");
  return (dx * dy).sum() / std::sqrt(sxx * syy);
}

ScreenResult sis_screen(const CompleteCaseSplit& split, std::optional<int> cap) {
  const int n1 = split.n1();
  const int q = static_cast<int>(split.X_obs.cols());
  if (n1 < 3) throw std::invalid_argument("screening needs at least 3 complete cases");
  if (q < 1) throw std::invalid_argument("screening needs at least 1 candidate column");
  if (cap && *cap < 1) throw std::invalid_argument("screening cap must be >= 1");

  const double sy = column_sd(split.y_obs);
  if (!(sy > 0.0)) {
    throw std::invalid_argument("target is constant on complete cases; cannot screen");
  }

  ScreenResult result;
  result.scores.resize(q);
  for (int j = 0; j < q; ++j) {
    const Vector col = split.X_obs.col(j);
    if (!(column_sd(col) > 0.0)) {
      throw std::invalid_argument("candidate column " +
                                  std::to_string(split.candidate_columns[j]) +
                                  " is constant on complete cases");
    }
    result.scores[j] = std::abs(pearson(col, split.y_obs));
  }

  int v = static_cast<int>(std::floor(n1 / std::log(static_cast<double>(n1))));
  v = std::max(1, std::min(v, q));
  if (cap) v = std::min(v, *cap);

  std::vector<int> order(q);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return result.scores[a] > result.scores[b];
  });
  result.selected.assign(order.begin(), order.begin() + v);
  return result;
}

}  // namespace himpute
