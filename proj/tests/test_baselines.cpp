#include <doctest.h>

#include "himpute/baselines.hpp"
#include "himpute/screening.hpp"
#include "himpute/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace himpute;

namespace {

IncompleteMatrix tiny_with_holes() {
  // Columns: y (target), a, b. Rows 1 and 3 missing.
  IncompleteMatrix data;
  data.values = Matrix(6, 3);
  data.values << 1.0, 1.0, 6.0,
      std::nan(""), 2.0, 5.0,
      3.0, 3.0, 4.0,
      std::nan(""), 4.0, 3.0,
      5.0, 5.0, 2.0,
      6.0, 6.0, 1.0;
  data.mask = {true, false, true, false, true, true};
  data.column_names = {"y", "a", "b"};
  data.validate();
  return data;
}

// Exhaustive nearest-neighbour oracle for the SUBJECTS mode on raw screened
// columns (here: all candidates, cap large enough to keep both).
double knn_subjects_oracle(const IncompleteMatrix& data, int row, int k) {
  const CompleteCaseSplit split = split_complete_cases(data);
  // Distances from `row` to every complete case over all candidate columns.
  std::vector<std::pair<double, int>> dist;
  for (int r = 0; r < split.n1(); ++r) {
    double d2 = 0.0;
    for (int j = 0; j < split.X_obs.cols(); ++j) {
      const double diff =
          data.values(row, split.candidate_columns[static_cast<std::size_t>(j)]) -
          split.X_obs(r, j);
      d2 += diff * diff;
    }
    dist.emplace_back(std::sqrt(d2), r);
  }
  std::stable_sort(dist.begin(), dist.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  double wsum = 0.0;
  double vsum = 0.0;
  for (int t = 0; t < k; ++t) {
    const double w = 1.0 / (dist[static_cast<std::size_t>(t)].first + 1e-12);
    wsum += w;
    vsum += w * split.y_obs[dist[static_cast<std::size_t>(t)].second];
  }
  return vsum / wsum;
}

// Physically removes one column; excluding it must behave exactly like this.
IncompleteMatrix drop_column(const IncompleteMatrix& data, int col) {
  IncompleteMatrix out;
  out.values = Matrix(data.values.rows(), data.values.cols() - 1);
  int t = 0;
  for (int j = 0; j < data.values.cols(); ++j) {
    if (j == col) continue;
    out.values.col(t) = data.values.col(j);
    out.column_names.push_back(data.column_names[static_cast<std::size_t>(j)]);
    ++t;
  }
  out.mask = data.mask;
  out.target_index = data.target_index < col ? data.target_index : data.target_index - 1;
  out.validate();
  return out;
}

}  // namespace

TEST_CASE("cc_analyze equals a direct fit on the observed rows") {
  const IncompleteMatrix data = tiny_with_holes();
  AnalysisSpec spec;
  spec.outcome = 0;
  spec.predictors = {1};
  const FitResult cc = cc_analyze(data, spec);
  // Observed rows: y = (1,3,5,6), a = (1,3,5,6): exact line y = a.
  CHECK(cc.estimates[0] == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(cc.estimates[1] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(cc.df == 2.0);
}

TEST_CASE("mi_full draws M datasets using every non-target column") {
  RngStream data_rng(700u);
  const int n = 60;
  const int p = 5;
  Matrix values(n, p + 1);
  std::vector<bool> mask(n, true);
  for (int i = 0; i < n; ++i) {
    for (int j = 1; j <= p; ++j) values(i, j) = data_rng.next_normal();
    values(i, 0) = values(i, 1) + 0.5 * data_rng.next_normal();
    if (i % 5 == 0) {
      mask[static_cast<std::size_t>(i)] = false;
      values(i, 0) = std::nan("");
    }
  }
  IncompleteMatrix data;
  data.values = values;
  data.mask = mask;
  for (int j = 0; j <= p; ++j) data.column_names.push_back("c" + std::to_string(j));
  data.validate();

  const MIEnsemble ens = mi_full(data, 3, 1e-5, RngStream(701u));
  CHECK(ens.M == 3);
  CHECK(ens.method_tag == Method::MI_FULL);
  CHECK(ens.diagnostics.v == p);
  CHECK(ens.diagnostics.d == p);
  for (const Matrix& filled : ens.datasets) CHECK(filled.allFinite());
  CHECK(ens.datasets[0] != ens.datasets[1]);

  // Deterministic under the same stream.
  const MIEnsemble again = mi_full(data, 3, 1e-5, RngStream(701u));
  for (int m = 0; m < 3; ++m) CHECK(again.datasets[m] == ens.datasets[m]);
}

TEST_CASE("mi_full survives q >= n1 thanks to the clamped sampler") {
  RngStream data_rng(702u);
  const int n = 20;
  const int p = 25;  // more columns than complete cases
  Matrix values(n, p + 1);
  std::vector<bool> mask(n, true);
  for (int i = 0; i < n; ++i) {
    for (int j = 1; j <= p; ++j) values(i, j) = data_rng.next_normal();
    values(i, 0) = values(i, 1) + data_rng.next_normal();
    if (i % 4 == 0) {
      mask[static_cast<std::size_t>(i)] = false;
      values(i, 0) = std::nan("");
    }
  }
  IncompleteMatrix data;
  data.values = values;
  data.mask = mask;
  for (int j = 0; j <= p; ++j) data.column_names.push_back("c" + std::to_string(j));
  data.validate();
  const MIEnsemble ens = mi_full(data, 2, 1e-5, RngStream(703u));
  for (const Matrix& filled : ens.datasets) CHECK(filled.allFinite());
}

TEST_CASE("knn subjects mode matches the exhaustive oracle") {
  const IncompleteMatrix data = tiny_with_holes();
  for (const int k : {1, 2, 3}) {
    CAPTURE(k);
    const Matrix filled = knn_impute(data, k, KnnMode::SUBJECTS, 10);
    for (const int row : {1, 3}) {
      CHECK(filled(row, 0) ==
            doctest::Approx(knn_subjects_oracle(data, row, k)).epsilon(1e-12));
    }
    // Observed cells untouched.
    CHECK(filled(0, 0) == 1.0);
    CHECK(filled(5, 0) == 6.0);
  }
}

TEST_CASE("knn subjects mode on random data matches the oracle") {
  RngStream rng(704u);
  const int n = 40;
  const int p = 3;  // small enough that screening keeps every candidate
  Matrix values(n, p + 1);
  std::vector<bool> mask(n, true);
  for (int i = 0; i < n; ++i) {
    for (int j = 1; j <= p; ++j) values(i, j) = rng.next_normal();
    values(i, 0) = values(i, 1) - values(i, 2) + 0.3 * rng.next_normal();
    if (i % 6 == 1) {
      mask[static_cast<std::size_t>(i)] = false;
      values(i, 0) = std::nan("");
    }
  }
  IncompleteMatrix data;
  data.values = values;
  data.mask = mask;
  data.column_names = {"y", "a", "b", "c"};
  data.validate();
  const Matrix filled = knn_impute(data, 4, KnnMode::SUBJECTS, 10);
  for (int i = 0; i < n; ++i) {
    if (!data.mask[static_cast<std::size_t>(i)]) {
      CHECK(filled(i, 0) == doctest::Approx(knn_subjects_oracle(data, i, 4)).epsilon(1e-12));
    }
  }
}

TEST_CASE("knn variables mode rescales donor columns to the target scale") {
  // Donor column a = 10 y + 5 on complete cases: correlation 1, and after
  // rescaling to the target's mean/sd it reproduces y exactly.
  IncompleteMatrix data;
  data.values = Matrix(7, 3);
  data.values << 1.0, 15.0, 0.3,
      2.0, 25.0, -0.1,
      std::nan(""), 35.0, 0.7,
      4.0, 45.0, 0.2,
      5.0, 55.0, -0.5,
      6.0, 65.0, 0.9,
      7.0, 75.0, -0.4;
  data.mask = {true, true, false, true, true, true, true};
  data.column_names = {"y", "a", "noise"};
  data.validate();
  const Matrix filled = knn_impute(data, 1, KnnMode::VARIABLES);
  // Complete-case y: (1,2,4,5,6,7) has mean 25/6 and the rescaled a matches y
  // linearly, so the imputed cell is the rescale of a = 35 to y units: y = 3.
  CHECK(filled(2, 0) == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("knn variables mode with k = 2 averages rescaled donors by correlation") {
  RngStream rng(705u);
  const int n = 50;
  Matrix values(n, 4);
  std::vector<bool> mask(n, true);
  for (int i = 0; i < n; ++i) {
    const double y = rng.next_normal();
    values(i, 0) = y;
    values(i, 1) = 2.0 * y + 0.05 * rng.next_normal();
    values(i, 2) = -1.0 * y + 0.3 * rng.next_normal();
    values(i, 3) = rng.next_normal();
    if (i % 9 == 2) {
      mask[static_cast<std::size_t>(i)] = false;
      values(i, 0) = std::nan("");
    }
  }
  IncompleteMatrix data;
  data.values = values;
  data.mask = mask;
  data.column_names = {"y", "a", "b", "c"};
  data.validate();
  const Matrix filled = knn_impute(data, 2, KnnMode::VARIABLES);

  // Oracle: columns a and b are the two most correlated; rescale each to the
  // target's complete-case moments and weight by 1/(1 - |corr| + eps).
  const CompleteCaseSplit split = split_complete_cases(data);
  const double ty_mean = split.y_obs.mean();
  const double ty_sd = column_sd(split.y_obs);
  struct Donor {
    int col;
    double corr_abs, mean, sd;
  };
  std::vector<Donor> donors;
  for (int j = 0; j < split.X_obs.cols(); ++j) {
    const Vector col = split.X_obs.col(j);
    donors.push_back({split.candidate_columns[static_cast<std::size_t>(j)],
                      std::abs(pearson(col, split.y_obs)), col.mean(),
                      column_sd(col)});
  }
  std::stable_sort(donors.begin(), donors.end(), [](const Donor& a, const Donor& b) {
    return (1.0 - a.corr_abs) < (1.0 - b.corr_abs);
  });
  for (int i = 0; i < n; ++i) {
    if (data.mask[static_cast<std::size_t>(i)]) continue;
    double wsum = 0.0;
    double vsum = 0.0;
    for (int t = 0; t < 2; ++t) {
      const double w = 1.0 / (1.0 - donors[static_cast<std::size_t>(t)].corr_abs + 1e-12);
      const double rescaled = (values(i, donors[static_cast<std::size_t>(t)].col) -
                               donors[static_cast<std::size_t>(t)].mean) /
                                  donors[static_cast<std::size_t>(t)].sd * ty_sd +
                              ty_mean;
      wsum += w;
      vsum += w * rescaled;
    }
    CHECK(filled(i, 0) == doctest::Approx(vsum / wsum).epsilon(1e-10));
  }
}

TEST_CASE("mi_full exclude_cols drops columns from the regression") {
  RngStream data_rng(708u);
  const int n = 60;
  const int p = 5;
  Matrix values(n, p + 1);
  std::vector<bool> mask(static_cast<std::size_t>(n), true);
  for (int i = 0; i < n; ++i) {
    for (int j = 1; j <= p; ++j) values(i, j) = data_rng.next_normal();
    values(i, 0) = values(i, 1) + 0.5 * data_rng.next_normal();
    if (i % 5 == 0) {
      mask[static_cast<std::size_t>(i)] = false;
      values(i, 0) = std::nan("");
    }
  }
  IncompleteMatrix data;
  data.values = values;
  data.mask = mask;
  for (int j = 0; j <= p; ++j) data.column_names.push_back("c" + std::to_string(j));
  data.validate();

  const MIEnsemble ens = mi_full(data, 3, 1e-5, RngStream(709u), {3});
  CHECK(ens.diagnostics.v == p - 1);
  for (const int j : ens.diagnostics.screened_columns) CHECK(j != 3);

  // Oracle: the same stream on the physically shrunk input imputes the same
  // values, because the design and the draw order agree column for column.
  const MIEnsemble oracle = mi_full(drop_column(data, 3), 3, 1e-5, RngStream(709u));
  for (int m = 0; m < 3; ++m) {
    CHECK(Vector(ens.datasets[static_cast<std::size_t>(m)].col(0)) ==
          Vector(oracle.datasets[static_cast<std::size_t>(m)].col(0)));
  }

  CHECK_THROWS_WITH_AS(
      (void)mi_full(data, 2, 1e-5, RngStream(1u), {1, 2, 3, 4, 5}),
      doctest::Contains("no predictors"), std::invalid_argument);
  CHECK_THROWS_AS((void)mi_full(data, 2, 1e-5, RngStream(1u), {0}),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)mi_full(data, 2, 1e-5, RngStream(1u), {2, 2}),
                  std::invalid_argument);
}

TEST_CASE("knn exclude_cols behaves like removing the columns") {
  SUBCASE("variables mode falls back to the next donor") {
    // Same construction as the rescaling test: column a is a perfect donor,
    // the noise column is not. Excluding a must change the imputed cell to
    // whatever the shrunk input produces.
    IncompleteMatrix data;
    data.values = Matrix(7, 3);
    data.values << 1.0, 15.0, 0.3,
        2.0, 25.0, -0.1,
        std::nan(""), 35.0, 0.7,
        4.0, 45.0, 0.2,
        5.0, 55.0, -0.5,
        6.0, 65.0, 0.9,
        7.0, 75.0, -0.4;
    data.mask = {true, true, false, true, true, true, true};
    data.column_names = {"y", "a", "noise"};
    data.validate();
    const Matrix excl = knn_impute(data, 1, KnnMode::VARIABLES, std::nullopt, {1});
    CHECK(excl(2, 0) != doctest::Approx(3.0).epsilon(1e-10));
    const Matrix oracle = knn_impute(drop_column(data, 1), 1, KnnMode::VARIABLES);
    CHECK(excl(2, 0) == doctest::Approx(oracle(2, 0)).epsilon(1e-12));
  }

  SUBCASE("subjects mode measures distance without the excluded column") {
    RngStream rng(710u);
    const int n = 50;
    Matrix values(n, 4);
    std::vector<bool> mask(static_cast<std::size_t>(n), true);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < 4; ++j) values(i, j) = rng.next_normal();
      if (i % 7 == 3) {
        mask[static_cast<std::size_t>(i)] = false;
        values(i, 0) = std::nan("");
      }
    }
    IncompleteMatrix data;
    data.values = values;
    data.mask = mask;
    data.column_names = {"y", "a", "b", "c"};
    data.validate();
    const Matrix excl = knn_impute(data, 2, KnnMode::SUBJECTS, 10, {2});
    const Matrix oracle = knn_impute(drop_column(data, 2), 2, KnnMode::SUBJECTS, 10);
    for (int i = 0; i < n; ++i) {
      if (data.mask[static_cast<std::size_t>(i)]) continue;
      CHECK(excl(i, 0) == doctest::Approx(oracle(i, 0)).epsilon(1e-12));
    }
  }

  SUBCASE("excluding every candidate is an error") {
    const IncompleteMatrix data = tiny_with_holes();
    CHECK_THROWS_WITH_AS(
        (void)knn_impute(data, 1, KnnMode::SUBJECTS, 10, {1, 2}),
        doctest::Contains("no candidates"), std::invalid_argument);
    CHECK_THROWS_AS((void)knn_impute(data, 1, KnnMode::VARIABLES, std::nullopt, {0}),
                    std::invalid_argument);
  }
}

TEST_CASE("knn validates k and donor availability") {
  const IncompleteMatrix data = tiny_with_holes();
  CHECK_THROWS((void)knn_impute(data, 0, KnnMode::SUBJECTS));
  // Only 4 complete cases: k = 5 cannot be served.
  CHECK_THROWS_WITH_AS((void)knn_impute(data, 5, KnnMode::SUBJECTS, 10),
                       doctest::Contains("donors"), std::invalid_argument);
  // Variables mode: only 2 candidate columns, k = 3 impossible.
  CHECK_THROWS((void)knn_impute(data, 3, KnnMode::VARIABLES));
}

TEST_CASE("knn with a fully observed target returns the values unchanged") {
  IncompleteMatrix data = tiny_with_holes();
  data.values(1, 0) = 2.0;
  data.values(3, 0) = 4.0;
  data.mask = {true, true, true, true, true, true};
  const Matrix filled = knn_impute(data, 2, KnnMode::SUBJECTS);
  CHECK(filled == data.values);
}
