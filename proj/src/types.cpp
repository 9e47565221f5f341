#include "himpute/types.hpp"

#include <array>
#include <utility>

namespace himpute {

namespace {

constexpr std::array<std::pair<Method, const char*>, 12> kMethodNames{{
    {Method::GS, "gs"},
    {Method::CC, "cc"},
    {Method::MI_FULL, "mi_full"},
    {Method::KNN_S, "knn_s"},
    {Method::KNN_V, "knn_v"},
    {Method::SPCA_ST, "spca_st"},
    {Method::SPCA_PMD, "spca_pmd"},
    {Method::SPCA_L, "spca_l"},
    {Method::SPCA_AL, "spca_al"},
    {Method::SDR_SIR, "sdr_sir"},
    {Method::SDR_SAVE, "sdr_save"},
    {Method::SDR_PHD, "sdr_phd"},
}};

}  // namespace

bool is_spca(Method m) {
  return m == Method::SPCA_ST || m == Method::SPCA_PMD || m == Method::SPCA_L ||
         m == Method::SPCA_AL;
}

bool is_sdr(Method m) {
  return m == Method::SDR_SIR || m == Method::SDR_SAVE || m == Method::SDR_PHD;
}

bool is_proposed(Method m) { return is_spca(m) || is_sdr(m); }

std::string to_string(Method m) {
  for (const auto& [method, name] : kMethodNames) {
    if (method == m) return name;
  }
  throw std::invalid_argument("unknown method enum value");
}

Method method_from_string(const std::string& name) {
  for (const auto& [method, method_name] : kMethodNames) {
    if (name == method_name) return method;
  }
  throw ConfigError("unknown method name: '" + name + "'");
}

std::string to_string(Family f) {
  return f == Family::LINEAR ? "linear" : "logistic";
}

Family family_from_string(const std::string& name) {
  if (name == "linear") return Family::LINEAR;
  if (name == "logistic") return Family::LOGISTIC;
  throw ConfigError("unknown family: '" + name + "' (expected linear or logistic)");
}

}  // namespace himpute
