#pragma once

#include "himpute/data_model.hpp"

#include <optional>
#include <vector>

namespace himpute {

// Output of marginal correlation screening. `selected` holds indices into the
// split's candidate columns ordered by decreasing score; `scores` is indexed
// the same way as the candidates (unsorted).
struct ScreenResult {
  std::vector<int> selected;
  Vector scores;

  int v() const { return static_cast<int>(selected.size()); }
};

// Ranks every candidate column by |Pearson correlation| with the observed
// target values and keeps the top v, where v = floor(n1 / ln n1) by default
// and `cap` further bounds it from above. Ties keep the lower column index
// first. Computed on complete cases only.
ScreenResult sis_screen(const CompleteCaseSplit& split,
                        std::optional<int> cap = std::nullopt);

// Pearson correlation of two equal-length vectors; both must be non-constant.
double pearson(const Vector& x, const Vector& y);

}  // namespace himpute
