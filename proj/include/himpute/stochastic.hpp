#pragma once

#include "himpute/types.hpp"

#include <cstdint>

namespace himpute {

// Deterministic counter-based generator: a splitmix64 core whose increment is
// derived from (seed, stream id), in the style of SplittableRandom. The same
// (seed, stream id) pair yields the same sequence on every platform, and
// substream derivation is a pure function of the stream identity, so children
// are reproducible no matter how much the parent has already drawn.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  // Independent child stream; the parent is left untouched and the result does
  // not depend on the parent's draw position.
  RngStream substream(std::uint64_t child_id) const;

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53-bit resolution.
  double next_uniform();
  // Uniform on (0, 1]; used where log() or pow() must not see zero.
  double next_uniform_pos();
  // Standard normal via Box-Muller without caching the second variate, so the
  // draw count per call is fixed at two uniforms.
  double next_normal();
  // Chi-square with df >= 1 degrees of freedom (Marsaglia-Tsang gamma).
  double next_chisq(int df);
  // Uniform integer on [0, bound) by rejection; bound must be positive.
  std::uint64_t next_below(std::uint64_t bound);

 private:
  RngStream(std::uint64_t key, std::uint64_t gamma, int);

  double next_gamma(double shape);

  std::uint64_t key_;      // initial counter; identifies the stream
  std::uint64_t counter_;  // advances by gamma_ per output
  std::uint64_t gamma_;    // odd increment, derived from the key
};

// k independent N(0,1) draws.
Vector sample_std_normal(RngStream& rng, int k);

// k rows from N(mean, cov); cov must be symmetric positive definite. Rows are
// generated as mean + L z with L the lower Cholesky factor of cov.
Matrix sample_mvn(RngStream& rng, const Vector& mean, const Matrix& cov, int k);

}  // namespace himpute
