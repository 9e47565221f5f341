#include "himpute/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_set>

namespace himpute {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

// One CSV record with RFC-4180 quoting; embedded newlines are not supported,
// which is fine for numeric tables.
std::vector<std::string> parse_record(const std::string& line, int line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      in_quotes = true;
    } else if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else {
      field += ch;
    }
  }
  if (in_quotes) {
    throw std::runtime_error("csv line " + std::to_string(line_no) +
                             ": unterminated quoted field");
  }
  fields.push_back(field);
  return fields;
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end && std::isfinite(out);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

}  // namespace

int IncompleteMatrix::n_observed() const {
  return static_cast<int>(std::count(mask.begin(), mask.end(), true));
}

void IncompleteMatrix::validate() const {
  const int n = n_rows();
  const int p = n_cols();
  if (n < 3) throw std::runtime_error("data must have at least 3 rows");
  if (p < 2) throw std::runtime_error("data must have at least 2 columns");
  if (target_index < 0 || target_index >= p) {
    throw std::runtime_error("target index out of range");
  }
  if (static_cast<int>(mask.size()) != n) {
    throw std::runtime_error("mask length does not match row count");
  }
  if (!column_names.empty() && static_cast<int>(column_names.size()) != p) {
    throw std::runtime_error("column name count does not match column count");
  }
  if (n_observed() < 2) {
    throw std::runtime_error("target column needs at least 2 observed values");
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      const bool missing_ok = (j == target_index) && !mask[i];
      if (missing_ok) {
        if (!std::isnan(values(i, j))) {
          throw std::runtime_error("masked target cell must hold NaN (row " +
                                   std::to_string(i) + ")");
        }
      } else if (!std::isfinite(values(i, j))) {
        throw std::runtime_error("non-finite value at row " + std::to_string(i) +
                                 ", column " + std::to_string(j));
      }
    }
  }
}

IncompleteMatrix load_csv(const std::string& path, const std::string& target_column,
                          const std::vector<std::string>& na_tokens) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");

  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("'" + path + "' is empty");
  }
  const auto header = parse_record(line, 1);
  std::vector<std::string> names;
  names.reserve(header.size());
  for (const auto& h : header) names.push_back(trim(h));
  {
    std::unordered_set<std::string> seen;
    for (const auto& name : names) {
      if (!seen.insert(name).second) {
        throw std::runtime_error("duplicate column name '" + name + "' in '" + path + "'");
      }
    }
  }
  const auto target_it = std::find(names.begin(), names.end(), target_column);
  if (target_it == names.end()) {
    throw std::runtime_error("target column '" + target_column + "' not found in '" +
                             path + "'");
  }
  const int target = static_cast<int>(target_it - names.begin());
  const int p = static_cast<int>(names.size());

  const auto is_na = [&](const std::string& cell) {
    return std::find(na_tokens.begin(), na_tokens.end(), cell) != na_tokens.end();
  };

  std::vector<std::vector<double>> rows;
  std::vector<bool> mask;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto record = parse_record(line, line_no);
    if (static_cast<int>(record.size()) != p) {
      throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected " +
                               std::to_string(p) + " fields, got " +
                               std::to_string(record.size()));
    }
    std::vector<double> row(p);
    bool observed = true;
    for (int j = 0; j < p; ++j) {
      const std::string cell = trim(record[j]);
      if (is_na(cell)) {
        if (j != target) {
          throw std::runtime_error("csv line " + std::to_string(line_no) +
                                   ": missing value in fully observed column '" +
                                   names[j] + "'");
        }
        row[j] = std::numeric_limits<double>::quiet_NaN();
        observed = false;
        continue;
      }
      if (!parse_double(cell, row[j])) {
        throw std::runtime_error("csv line " + std::to_string(line_no) +
                                 ": cannot parse '" + cell + "' in column '" +
                                 names[j] + "'");
      }
    }
    rows.push_back(std::move(row));
    mask.push_back(observed);
  }

  const int n = static_cast<int>(rows.size());
  if (n < 3) throw std::runtime_error("'" + path + "' has fewer than 3 data rows");

  IncompleteMatrix data;
  data.values.resize(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) data.values(i, j) = rows[i][j];
  }
  data.mask = std::move(mask);
  data.column_names = std::move(names);
  data.target_index = target;

  if (data.n_observed() == 0) {
    throw std::runtime_error("target column '" + target_column + "' is fully missing");
  }
  data.validate();
  return data;
}

namespace {

void write_table(const IncompleteMatrix& data, const Matrix& values,
                 const std::string& path, const std::string& na_token) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  const int n = static_cast<int>(values.rows());
  const int p = static_cast<int>(values.cols());
  for (int j = 0; j < p; ++j) {
    if (j > 0) out << ',';
    out << quote_if_needed(data.column_names.empty() ? "c" + std::to_string(j)
                                                     : data.column_names[j]);
  }
  out << '\n';
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      if (j > 0) out << ',';
      if (j == data.target_index && std::isnan(values(i, j))) {
        out << na_token;
      } else {
        out << format_double(values(i, j));
      }
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace

void emit_csv(const IncompleteMatrix& data, const std::string& path,
              const std::string& na_token) {
  write_table(data, data.values, path, na_token);
}

void emit_completed_csv(const IncompleteMatrix& data, const Matrix& completed,
                        const std::string& path) {
  if (completed.rows() != data.values.rows() || completed.cols() != data.values.cols()) {
    throw std::invalid_argument("completed matrix dimensions do not match data");
  }
  write_table(data, completed, path, "NA");
}

int NamedMatrix::column(const std::string& name) const {
  const auto it = std::find(column_names.begin(), column_names.end(), name);
  if (it == column_names.end()) {
    throw std::runtime_error("column '" + name + "' not found");
  }
  return static_cast<int>(it - column_names.begin());
}

NamedMatrix load_complete_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");

  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("'" + path + "' is empty");
  }
  const auto header = parse_record(line, 1);
  NamedMatrix out;
  out.column_names.reserve(header.size());
  for (const auto& h : header) out.column_names.push_back(trim(h));
  const int p = static_cast<int>(out.column_names.size());

  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto record = parse_record(line, line_no);
    if (static_cast<int>(record.size()) != p) {
      throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected " +
                               std::to_string(p) + " fields, got " +
                               std::to_string(record.size()));
    }
    std::vector<double> row(p);
    for (int j = 0; j < p; ++j) {
      const std::string cell = trim(record[j]);
      if (!parse_double(cell, row[j])) {
        throw std::runtime_error("csv line " + std::to_string(line_no) +
                                 ": cannot parse '" + cell + "' in column '" +
                                 out.column_names[j] + "' (completed data expected)");
      }
    }
    rows.push_back(std::move(row));
  }
  const int n = static_cast<int>(rows.size());
  if (n < 1) throw std::runtime_error("'" + path + "' has no data rows");
  out.values.resize(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) out.values(i, j) = rows[i][j];
  }
  return out;
}

CompleteCaseSplit split_complete_cases(const IncompleteMatrix& data) {
  data.validate();
  CompleteCaseSplit split;
  split.target_index = data.target_index;
  const int n = data.n_rows();
  const int p = data.n_cols();
  for (int i = 0; i < n; ++i) {
    (data.mask[i] ? split.obs_rows : split.mis_rows).push_back(i);
  }
  if (split.n1() < 3) {
    throw std::runtime_error("too few complete cases (" + std::to_string(split.n1()) +
                             ", need at least 3)");
  }
  for (int j = 0; j < p; ++j) {
    if (j != data.target_index) split.candidate_columns.push_back(j);
  }
  const int n1 = split.n1();
  const int n2 = split.n2();
  const int q = p - 1;
  split.y_obs.resize(n1);
  split.X_obs.resize(n1, q);
  split.X_mis.resize(n2, q);
  for (int i = 0; i < n1; ++i) {
    const int row = split.obs_rows[i];
    split.y_obs[i] = data.values(row, data.target_index);
    for (int j = 0; j < q; ++j) {
      split.X_obs(i, j) = data.values(row, split.candidate_columns[j]);
    }
  }
  for (int i = 0; i < n2; ++i) {
    const int row = split.mis_rows[i];
    for (int j = 0; j < q; ++j) {
      split.X_mis(i, j) = data.values(row, split.candidate_columns[j]);
    }
  }
  return split;
}

void validate_aux_columns(const IncompleteMatrix& data, const std::vector<int>& cols,
                          const std::string& what) {
  std::vector<bool> seen(static_cast<std::size_t>(data.n_cols()), false);
  for (const int j : cols) {
    if (j < 0 || j >= data.n_cols()) {
      throw std::invalid_argument(what + ": column index " + std::to_string(j) +
                                  " out of range");
    }
    if (j == data.target_index) {
      throw std::invalid_argument(what + ": the target column cannot be listed");
    }
    if (seen[static_cast<std::size_t>(j)]) {
      throw std::invalid_argument(what + ": duplicate column index " +
                                  std::to_string(j));
    }
    seen[static_cast<std::size_t>(j)] = true;
  }
}

CompleteCaseSplit drop_candidate_columns(const CompleteCaseSplit& split,
                                         const std::vector<int>& original_columns) {
  std::vector<int> kept;  // indices into the split's candidate arrays
  for (int j = 0; j < static_cast<int>(split.candidate_columns.size()); ++j) {
    const int original = split.candidate_columns[j];
    if (std::find(original_columns.begin(), original_columns.end(), original) ==
        original_columns.end()) {
      kept.push_back(j);
    }
  }
  CompleteCaseSplit out;
  out.obs_rows = split.obs_rows;
  out.mis_rows = split.mis_rows;
  out.y_obs = split.y_obs;
  out.target_index = split.target_index;
  const int q = static_cast<int>(kept.size());
  out.X_obs.resize(split.X_obs.rows(), q);
  out.X_mis.resize(split.X_mis.rows(), q);
  out.candidate_columns.reserve(kept.size());
  for (int j = 0; j < q; ++j) {
    out.X_obs.col(j) = split.X_obs.col(kept[j]);
    out.X_mis.col(j) = split.X_mis.col(kept[j]);
    out.candidate_columns.push_back(split.candidate_columns[kept[j]]);
  }
  return out;
}

double column_mean(const Vector& x) {
  if (x.size() == 0) throw std::invalid_argument("mean of empty vector");
  return x.mean();
}

double column_sd(const Vector& x) {
  if (x.size() < 2) throw std::invalid_argument("sd needs at least 2 values");
  const double m = x.mean();
  return std::sqrt((x.array() - m).square().sum() / (x.size() - 1));
}

Standardized standardize_columns(const Matrix& X) {
  if (X.rows() < 2 || X.cols() < 1) {
    throw std::invalid_argument("standardize_columns needs at least 2 rows and 1 column");
  }
  const int p = static_cast<int>(X.cols());
  Standardized out;
  out.X.resizeLike(X);
  out.means.resize(p);
  out.sds.resize(p);
  for (int j = 0; j < p; ++j) {
    out.means[j] = X.col(j).mean();
    out.sds[j] = column_sd(X.col(j));
    if (!(out.sds[j] > 0.0) || !std::isfinite(out.sds[j])) {
      throw std::runtime_error("column " + std::to_string(j) +
                               " is constant; cannot standardize");
    }
    out.X.col(j) = (X.col(j).array() - out.means[j]) / out.sds[j];
  }
  return out;
}

}  // namespace himpute
