#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace himpute {

inline constexpr const char* kVersion = "0.1.0";

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Malformed configuration, arguments, or file schemas. The CLI maps this to
// exit code 2; every other exception maps to 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Every method the harness can run. GS and CC are analysis-only; the rest
// produce imputations. Enum values are stable identifiers: they key the
// per-method random substreams, so reordering them changes results.
enum class Method {
  GS,
  CC,
  MI_FULL,
  KNN_S,
  KNN_V,
  SPCA_ST,
  SPCA_PMD,
  SPCA_L,
  SPCA_AL,
  SDR_SIR,
  SDR_SAVE,
  SDR_PHD,
};

bool is_spca(Method m);
bool is_sdr(Method m);
// The seven screening + dimension-reduction imputation methods.
bool is_proposed(Method m);

std::string to_string(Method m);
Method method_from_string(const std::string& name);

enum class Family { LINEAR, LOGISTIC };

std::string to_string(Family f);
Family family_from_string(const std::string& name);

}  // namespace himpute
