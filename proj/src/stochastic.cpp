#include "himpute/stochastic.hpp"

#include <bit>
#include <cmath>
#include <numbers>

namespace himpute {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kStreamSalt = 0xD1B54A32D192ED03ull;
constexpr std::uint64_t kChildSalt = 0x8CB92BA72F3D8DD7ull;

// splitmix64 output mix.
std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

// Increment must be odd (full period) and should not be too regular; the
// bit-transition check mirrors SplittableRandom's gamma conditioning.
std::uint64_t make_gamma(std::uint64_t z) {
  z = mix64(z) | 1ull;
  if (std::popcount(z ^ (z >> 1)) < 24) z ^= 0xAAAAAAAAAAAAAAAAull;
  return z;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) {
  key_ = mix64(mix64(seed + kGolden) ^ mix64(stream_id + kStreamSalt));
  counter_ = key_;
  gamma_ = make_gamma(key_ + kGolden);
}

RngStream::RngStream(std::uint64_t key, std::uint64_t gamma, int)
    : key_(key), counter_(key), gamma_(gamma) {}

RngStream RngStream::substream(std::uint64_t child_id) const {
  const std::uint64_t child_key = mix64(key_ ^ mix64(child_id + kChildSalt));
  return RngStream(child_key, make_gamma(child_key + kGolden), 0);
}

std::uint64_t RngStream::next_u64() {
  counter_ += gamma_;
  return mix64(counter_);
}

double RngStream::next_uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_uniform_pos() {
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double RngStream::next_normal() {
  const double u1 = next_uniform_pos();
  const double u2 = next_uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::next_gamma(double shape) {
  // Marsaglia-Tsang squeeze; for shape < 1 boost via Gamma(shape+1) * U^(1/shape).
  if (shape < 1.0) {
    const double boost = next_gamma(shape + 1.0);
    return boost * std::pow(next_uniform_pos(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = next_normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = next_uniform_pos();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double RngStream::next_chisq(int df) {
  if (df < 1) throw std::invalid_argument("chi-square requires df >= 1");
  return 2.0 * next_gamma(0.5 * df);
}

std::uint64_t RngStream::next_below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("next_below requires bound > 0");
  const std::uint64_t threshold = (-bound) % bound;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % bound;
  }
}

Vector sample_std_normal(RngStream& rng, int k) {
  if (k < 0) throw std::invalid_argument("sample_std_normal requires k >= 0");
  Vector z(k);
  for (int i = 0; i < k; ++i) z[i] = rng.next_normal();
  return z;
}

Matrix sample_mvn(RngStream& rng, const Vector& mean, const Matrix& cov, int k) {
  const auto q = mean.size();
  if (cov.rows() != q || cov.cols() != q) {
    throw std::invalid_argument("sample_mvn: cov dimensions do not match mean");
  }
  if (k < 0) throw std::invalid_argument("sample_mvn requires k >= 0");
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("sample_mvn: covariance not positive definite");
  }
  const Matrix L = llt.matrixL();
  Matrix out(k, q);
  for (int i = 0; i < k; ++i) {
    out.row(i) = (mean + L * sample_std_normal(rng, static_cast<int>(q))).transpose();
  }
  return out;
}

}  // namespace himpute
