#include "himpute/reduction.hpp"

namespace himpute {

Matrix project(const ReductionMap& map, const Matrix& X) {
  if (X.cols() != map.v()) {
    throw std::invalid_argument("project: X has " + std::to_string(X.cols()) +
                                " columns, map expects " + std::to_string(map.v()));
  }
  if (map.center.size() != map.v() || map.scale.size() != map.v()) {
    throw std::invalid_argument("project: map center/scale size mismatch");
  }
  Matrix Xs = X;
  Xs.rowwise() -= map.center.transpose();
  Xs.array().rowwise() /= map.scale.transpose().array();
  return Xs * map.loadings.transpose();
}

ReductionMap truncate_map(const ReductionMap& map, int d) {
  if (d < 1 || d > map.d()) {
    throw std::invalid_argument("truncate_map: d out of range");
  }
  ReductionMap out = map;
  out.loadings = map.loadings.topRows(d);
  if (map.explained_variance.size() >= d) {
    out.explained_variance = map.explained_variance.head(d);
  }
  return out;
}

ComponentRule component_rule_from_string(const std::string& name) {
  if (name == "first_one") return ComponentRule::FIRST_ONE;
  if (name == "var60") return ComponentRule::VAR60;
  if (name == "var80") return ComponentRule::VAR80;
  throw ConfigError("unknown component rule: '" + name +
                    "' (expected first_one, var60 or var80)");
}

std::string to_string(ComponentRule rule) {
  switch (rule) {
    case ComponentRule::FIRST_ONE: return "first_one";
    case ComponentRule::VAR60: return "var60";
    case ComponentRule::VAR80: return "var80";
  }
  throw std::invalid_argument("unknown component rule enum value");
}

}  // namespace himpute
