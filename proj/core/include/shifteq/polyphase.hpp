#pragma once

#include <cstddef>

#include "shifteq/tensor.hpp"

namespace shifteq {

/// Row/column offset of one polyphase, both in [0, s).
struct PolyphaseIndex {
  std::size_t p = 0;
  std::size_t q = 0;

  friend bool operator==(const PolyphaseIndex&, const PolyphaseIndex&) = default;
};

/// Output of polyphase anchoring: the input circularly shifted by (-p, -q) so
/// that its maximum-norm polyphase starts at the origin, plus the phase that
/// was selected and the stride it was selected at.
struct AnchorResult {
  Tensor anchored;
  PolyphaseIndex phase;
  std::size_t stride = 1;
};

/// Subgrid out[..., i, j] = x[..., p + s*i, q + s*j]. Requires s to divide
/// both trailing axes and the index to be in range.
Tensor polyphase_extract(const Tensor& x, PolyphaseIndex idx, std::size_t s);

/// Index of the polyphase with the largest Lp norm (p_norm in {1, 2}).
/// Exact ties resolve to the lexicographically smallest (p, q).
PolyphaseIndex max_polyphase(const Tensor& x, std::size_t s, int p_norm = 2);

/// True when the maximum-norm polyphase is strictly unique. Equivariance is
/// only guaranteed on unique-max inputs; test suites resample ties.
bool unique_max_polyphase(const Tensor& x, std::size_t s, int p_norm = 2);

/// Selects the maximum polyphase and circularly shifts the input by (-p, -q)
/// so that polyphase lands on the anchor grid.
AnchorResult anchor(const Tensor& x, std::size_t s, int p_norm = 2);

/// Inverse of the anchor shift: circular_shift(anchored, (+p, +q)).
/// restore(anchor(x)) == x bit-exactly.
Tensor restore(const AnchorResult& r);

/// Applies the inverse anchor shift to any same-grid tensor, e.g. the output
/// of an operator that ran on the anchored input.
Tensor restore(const Tensor& t, PolyphaseIndex phase);

}  // namespace shifteq
