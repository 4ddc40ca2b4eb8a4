#pragma once

#include <cstddef>

#include "shifteq/conv.hpp"
#include "shifteq/polyphase.hpp"
#include "shifteq/tensor.hpp"

namespace shifteq {

/// Projection matrices for one attention operator: Wq [d, d_k], Wk [d, d_k],
/// Wv [d, d_v].
struct AttentionParams {
  Tensor wq;
  Tensor wk;
  Tensor wv;
};

/// Additive relative-position bias inside the attention softmax.
struct RelBias {
  enum class Structure { free_form, circulant };

  Tensor bias;  // [M^2, M^2]
  Structure tag = Structure::free_form;

  /// Arbitrary square bias matrix.
  static RelBias free_form(Tensor b);

  /// Builds B[i][j] = b[(i - j) mod n] from a length-n vector; this is the
  /// structure that commutes with cyclic token shifts.
  static RelBias circulant(const Tensor& b);

  /// Validates a square matrix as circulant and tags it. Throws if any entry
  /// deviates from the (i - j) mod n structure.
  static RelBias circulant_from_matrix(Tensor b);
};

/// Non-overlapping window layout over an H x W token grid.
struct WindowSpec {
  std::size_t w = 1;
  std::size_t rows = 1;  // H / w
  std::size_t cols = 1;  // W / w

  static WindowSpec for_grid(std::size_t h, std::size_t width, std::size_t w);
};

/// SoftMax(X Wq (X Wk)^T) X Wv over token rows. No 1/sqrt(d_k) scaling unless
/// requested.
Tensor self_attention(const Tensor& tokens, const AttentionParams& params,
                      bool scale_by_sqrt_dk = false);

/// Self-attention applied independently inside each w x w window of a
/// [C, H, W] grid (tokens are the channel vectors at each pixel, windows
/// flattened row-major). Result is [d_v, H, W].
Tensor window_attention(const Tensor& x, const WindowSpec& spec,
                        const AttentionParams& params);

struct AttnPolyResult {
  Tensor out;
  PolyphaseIndex phase;
};

/// Window attention on the polyphase-anchored input (anchor stride = window
/// size). The phase is returned so callers can restore alignment.
AttnPolyResult window_attention_poly(const Tensor& x, const WindowSpec& spec,
                                     const AttentionParams& params, int p_norm = 2);

/// Global subsampled attention: queries from every token, keys/values from
/// the strided-convolution subsampled grid. h must have stride s and input
/// channels matching x; result is [d_v, H, W].
Tensor gsa(const Tensor& x, std::size_t s, const ConvFilter& h,
           const AttentionParams& params);

/// GSA on the polyphase-anchored input (anchor stride = subsample stride).
AttnPolyResult gsa_poly(const Tensor& x, std::size_t s, const ConvFilter& h,
                        const AttentionParams& params, int p_norm = 2);

/// Attention with an additive bias on the logits:
/// SoftMax(Q K^T [/ sqrt(d_k)] + B) V.
Tensor attention_with_bias(const Tensor& tokens, const AttentionParams& params,
                           const RelBias& bias, bool scale_by_sqrt_dk = true);

/// Absolute positional embedding: x + e, shapes must match. Equivariant only
/// when e is constant, which is the textbook failure mode.
Tensor abs_pos_embed(const Tensor& x, const Tensor& e);

}  // namespace shifteq
