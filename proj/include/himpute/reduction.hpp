#pragma once

#include "himpute/types.hpp"

#include <vector>

namespace himpute {

// A fitted dimension reduction: rows of `loadings` are the component/direction
// vectors over the v input columns. `center`/`scale` are applied to new data
// before projecting (identity for reductions fitted on raw columns).
// `source_columns` maps input column j back to its column in the originating
// matrix; the imputation pipeline fills it after screening.
struct ReductionMap {
  Matrix loadings;  // d x v
  std::vector<int> source_columns;
  Method method = Method::SPCA_ST;
  Vector explained_variance;  // per component, fraction of total variance
  Vector center;              // length v
  Vector scale;               // length v

  int d() const { return static_cast<int>(loadings.rows()); }
  int v() const { return static_cast<int>(loadings.cols()); }
};

// Z = ((X - center) / scale) * loadings^T; X must have v columns.
Matrix project(const ReductionMap& map, const Matrix& X);

// Keeps the first d components of the map.
ReductionMap truncate_map(const ReductionMap& map, int d);

// Rule for how many fitted components the pipeline keeps.
enum class ComponentRule { FIRST_ONE, VAR60, VAR80 };

// Chosen count; `truncated` reports that a variance target could not be met
// with the components available, so everything fitted was kept.
struct ComponentChoice {
  int d = 1;
  bool truncated = false;
};

ComponentRule component_rule_from_string(const std::string& name);
std::string to_string(ComponentRule rule);

}  // namespace himpute
