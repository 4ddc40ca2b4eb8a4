#pragma once

#include <cstddef>
#include <optional>

#include "shifteq/polyphase.hpp"
#include "shifteq/tensor.hpp"

namespace shifteq {

/// 2-D cross-correlation filter. Weights are [C_out, C_in, k, k]; the kernel
/// is anchored so odd sizes are centered and even sizes lean top-left
/// (offset (k-1)/2). Boundary handling is always circular.
struct ConvFilter {
  Tensor weights;
  std::size_t stride = 1;
  std::optional<Tensor> bias;  // [C_out]

  std::size_t out_channels() const { return weights.dim(0); }
  std::size_t in_channels() const { return weights.dim(1); }
  std::size_t kernel() const { return weights.dim(2); }

  /// Identity filter: out channel o copies in channel o (delta kernel).
  static ConvFilter identity(std::size_t channels, std::size_t k = 1);
};

/// One odd k x k kernel per channel, no cross-channel mixing.
struct DepthwiseFilter {
  Tensor weights;  // [C, k, k]

  std::size_t channels() const { return weights.dim(0); }
  std::size_t kernel() const { return weights.dim(1); }
};

/// Stride-1 cross-correlation with wrap-around indexing; output spatial size
/// equals the input. x is [C_in, H, W], result [C_out, H, W].
Tensor conv2d_circular(const Tensor& x, const ConvFilter& f);

/// Strided circular cross-correlation, [C_in, H, W] -> [C_out, H/s, W/s].
/// Equals polyphase_extract(conv2d_circular(x, f), (0,0), s) bit-exactly.
Tensor strided_conv(const Tensor& x, const ConvFilter& f, std::size_t s);
Tensor strided_conv(const Tensor& x, const ConvFilter& f);

/// Per-channel circular cross-correlation (Y_i = W_i * X_i). Kernel size must
/// be odd.
Tensor depthwise_conv_circular(const Tensor& x, const DepthwiseFilter& f);

struct PatchEmbedResult {
  Tensor out;
  PolyphaseIndex phase;
};

/// Polyphase-anchored patch embedding: anchor at stride s, then strided
/// convolution at the same stride. The anchoring stride must equal the
/// convolution stride for the composition to be shift-equivariant.
PatchEmbedResult patch_embed_poly(const Tensor& x, const ConvFilter& f, std::size_t s,
                                  int p_norm = 2);

}  // namespace shifteq
