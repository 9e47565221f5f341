#pragma once

#include "himpute/types.hpp"

#include <string>
#include <vector>

namespace himpute {

// n x p numeric table in which exactly one column (the target) may contain
// missing cells. All other columns are fully observed by contract. Missing
// target cells hold NaN in `values` and false in `mask`.
struct IncompleteMatrix {
  Matrix values;
  std::vector<bool> mask;  // length n; true = target observed in that row
  std::vector<std::string> column_names;
  int target_index = 0;

  int n_rows() const { return static_cast<int>(values.rows()); }
  int n_cols() const { return static_cast<int>(values.cols()); }
  int n_observed() const;
  int n_missing() const { return n_rows() - n_observed(); }

  // Enforces the structural invariants: n >= 3, p >= 2, a valid target index,
  // mask length n with at least 2 observed rows, finite non-target columns,
  // and NaN exactly on the masked target cells.
  void validate() const;
};

// Row split by target observability. X drops the target column; y_obs holds
// the observed target values. candidate_columns maps X column j back to its
// column index in the source matrix.
struct CompleteCaseSplit {
  std::vector<int> obs_rows;
  std::vector<int> mis_rows;
  Vector y_obs;
  Matrix X_obs;
  Matrix X_mis;
  std::vector<int> candidate_columns;
  int target_index = 0;

  int n1() const { return static_cast<int>(obs_rows.size()); }
  int n2() const { return static_cast<int>(mis_rows.size()); }
};

struct Standardized {
  Matrix X;      // centered and scaled columns
  Vector means;  // per-column mean
  Vector sds;    // per-column sample standard deviation (n-1 denominator)
};

// Reads a CSV file with a header row. Cells in `na_tokens` are treated as
// missing, and are only legal in the target column. Every other cell must
// parse as a finite number.
IncompleteMatrix load_csv(const std::string& path, const std::string& target_column,
                          const std::vector<std::string>& na_tokens = {"NA", "", "NaN"});

// Writes header + rows; masked target cells are emitted as `na_token`.
// Numeric formatting round-trips doubles exactly.
void emit_csv(const IncompleteMatrix& data, const std::string& path,
              const std::string& na_token = "NA");

// Same row layout as `data`, but with values taken from `completed` (an
// imputed copy of data.values).
void emit_completed_csv(const IncompleteMatrix& data, const Matrix& completed,
                        const std::string& path);

// A fully observed numeric table (e.g. one imputed dataset re-read from disk).
struct NamedMatrix {
  Matrix values;
  std::vector<std::string> column_names;

  int column(const std::string& name) const;  // throws if absent
};

// Reads a CSV with a header; every cell must parse as a finite number.
NamedMatrix load_complete_csv(const std::string& path);

// Requires at least 3 complete cases.
CompleteCaseSplit split_complete_cases(const IncompleteMatrix& data);

// Throws unless every index in `cols` names a distinct non-target column of
// `data`. `what` names the offending option in the message.
void validate_aux_columns(const IncompleteMatrix& data, const std::vector<int>& cols,
                          const std::string& what);

// Copy of `split` with the given original-matrix columns removed from the
// candidate set (X_obs, X_mis, candidate_columns). Columns not present are
// ignored.
CompleteCaseSplit drop_candidate_columns(const CompleteCaseSplit& split,
                                         const std::vector<int>& original_columns);

// Centers and scales every column; throws if any column is constant.
Standardized standardize_columns(const Matrix& X);

// Column mean / sample sd helpers shared across modules.
double column_mean(const Vector& x);
double column_sd(const Vector& x);  // n-1 denominator; x.size() >= 2

}  // namespace himpute
