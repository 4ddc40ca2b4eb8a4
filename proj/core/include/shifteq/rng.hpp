#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "shifteq/tensor.hpp"

namespace shifteq {

/// Deterministic counter-based generator (splitmix64). The same seed yields
/// the same sequence on every platform; there is no hidden global state, so
/// independent streams are cheap to derive per consumer.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Next raw 64-bit word of the stream.
  std::uint64_t next_u64();

  /// Uniform in [0, 1), 53-bit resolution.
  double next_unit();

  /// Standard normal via Box-Muller; consumes two words per draw.
  double next_normal();

  /// Integer uniform in [0, bound) by modulo reduction. Bias is negligible
  /// for the small bounds used here (bound << 2^64).
  std::uint64_t next_below(std::uint64_t bound);

  /// Independent stream keyed by (seed, label). Used for per-weight-tensor
  /// streams so that adding or removing one tensor never perturbs another.
  static Rng derive(std::uint64_t seed, std::string_view label);

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

/// Tensor filled with standard normal draws, row-major fill order.
Tensor rng_normal(Rng& r, std::vector<std::size_t> shape);

/// Tensor of dyadic lattice values j * 2^-k with j uniform in [-2^k, 2^k].
/// Entries are exactly representable and their squares sum exactly in 64-bit
/// floats at desk scale, so equivariance checks on these inputs are bit-exact.
Tensor rng_lattice(Rng& r, std::vector<std::size_t> shape, int k);

}  // namespace shifteq
