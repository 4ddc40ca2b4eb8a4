#include "shifteq/attention.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace shifteq {

namespace {

void check_params(const AttentionParams& p, std::size_t d_q, std::size_t d_kv) {
  if (p.wq.rank() != 2 || p.wk.rank() != 2 || p.wv.rank() != 2) {
    throw std::invalid_argument("attention: projections must be rank-2");
  }
  if (p.wq.dim(0) != d_q) throw std::invalid_argument("attention: Wq rows != token dim");
  if (p.wk.dim(0) != d_kv) throw std::invalid_argument("attention: Wk rows != key token dim");
  if (p.wv.dim(0) != d_kv) throw std::invalid_argument("attention: Wv rows != value token dim");
  if (p.wq.dim(1) != p.wk.dim(1)) {
    throw std::invalid_argument("attention: Wq/Wk column counts disagree");
  }
}

Tensor attention_core(const Tensor& q_tokens, const Tensor& kv_tokens,
                      const AttentionParams& p, bool scale, const Tensor* bias) {
  const Tensor q = matmul(q_tokens, p.wq);
  const Tensor k = matmul(kv_tokens, p.wk);
  const Tensor v = matmul(kv_tokens, p.wv);

  const std::size_t n = q.dim(0), m = k.dim(0), dk = q.dim(1);
  Tensor logits({n, m});
  const double inv_scale = scale ? 1.0 / std::sqrt(static_cast<double>(dk)) : 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < dk; ++l) acc += q(i, l) * k(j, l);
      logits(i, j) = acc * inv_scale + (bias ? (*bias)(i, j) : 0.0);
    }
  }
  return matmul(softmax_rows(logits), v);
}

}  // namespace

RelBias RelBias::free_form(Tensor b) {
  if (b.rank() != 2 || b.dim(0) != b.dim(1)) {
    throw std::invalid_argument("RelBias: bias must be square");
  }
  return RelBias{std::move(b), Structure::free_form};
}

RelBias RelBias::circulant(const Tensor& b) {
  if (b.rank() != 1) throw std::invalid_argument("RelBias::circulant: expected a vector");
  const std::size_t n = b.dim(0);
  Tensor full({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      full(i, j) = b[(i + n - j) % n];
    }
  }
  return RelBias{std::move(full), Structure::circulant};
}

RelBias RelBias::circulant_from_matrix(Tensor b) {
  if (b.rank() != 2 || b.dim(0) != b.dim(1)) {
    throw std::invalid_argument("RelBias: bias must be square");
  }
  const std::size_t n = b.dim(0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (b(i, j) != b((i + 1) % n, (j + 1) % n)) {
        throw std::invalid_argument("RelBias: matrix is not circulant");
      }
    }
  }
  return RelBias{std::move(b), Structure::circulant};
}

WindowSpec WindowSpec::for_grid(std::size_t h, std::size_t width, std::size_t w) {
  if (w == 0 || h % w != 0 || width % w != 0) {
    throw std::invalid_argument("WindowSpec: window must divide the grid");
  }
  return WindowSpec{w, h / w, width / w};
}

Tensor self_attention(const Tensor& tokens, const AttentionParams& params,
                      bool scale_by_sqrt_dk) {
  if (tokens.rank() != 2) throw std::invalid_argument("self_attention: tokens must be [N,d]");
  check_params(params, tokens.dim(1), tokens.dim(1));
  return attention_core(tokens, tokens, params, scale_by_sqrt_dk, nullptr);
}

Tensor window_attention(const Tensor& x, const WindowSpec& spec,
                        const AttentionParams& params) {
  if (x.rank() != 3) throw std::invalid_argument("window_attention: input must be [C,H,W]");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h != spec.rows * spec.w || w != spec.cols * spec.w) {
    throw std::invalid_argument("window_attention: grid does not match window spec");
  }
  check_params(params, c, c);
  const std::size_t ws = spec.w;
  const std::size_t dv = params.wv.dim(1);

  Tensor out({dv, h, w});
  Tensor win_tokens({ws * ws, c});
  for (std::size_t wi = 0; wi < spec.rows; ++wi) {
    for (std::size_t wj = 0; wj < spec.cols; ++wj) {
      // Row-major flatten of the window into tokens.
      for (std::size_t u = 0; u < ws; ++u) {
        for (std::size_t v = 0; v < ws; ++v) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            win_tokens(u * ws + v, ch) = x(ch, wi * ws + u, wj * ws + v);
          }
        }
      }
      const Tensor res = self_attention(win_tokens, params);
      for (std::size_t u = 0; u < ws; ++u) {
        for (std::size_t v = 0; v < ws; ++v) {
          for (std::size_t ch = 0; ch < dv; ++ch) {
            out(ch, wi * ws + u, wj * ws + v) = res(u * ws + v, ch);
          }
        }
      }
    }
  }
  return out;
}

AttnPolyResult window_attention_poly(const Tensor& x, const WindowSpec& spec,
                                     const AttentionParams& params, int p_norm) {
  AnchorResult a = anchor(x, spec.w, p_norm);
  return AttnPolyResult{window_attention(a.anchored, spec, params), a.phase};
}

Tensor gsa(const Tensor& x, std::size_t s, const ConvFilter& h,
           const AttentionParams& params) {
  if (x.rank() != 3) throw std::invalid_argument("gsa: input must be [C,H,W]");
  if (h.stride != s) throw std::invalid_argument("gsa: filter stride must equal s");
  const std::size_t height = x.dim(1), width = x.dim(2);

  const Tensor sub = strided_conv(x, h, s);  // [C_h, H/s, W/s]
  check_params(params, x.dim(0), sub.dim(0));

  const Tensor q_tokens = grid_to_tokens(x);
  const Tensor kv_tokens = grid_to_tokens(sub);
  const Tensor res = attention_core(q_tokens, kv_tokens, params, false, nullptr);
  return tokens_to_grid(res, height, width);
}

AttnPolyResult gsa_poly(const Tensor& x, std::size_t s, const ConvFilter& h,
                        const AttentionParams& params, int p_norm) {
  // The whole input is anchored once; queries and the subsampled keys/values
  // are derived from the same anchored tensor.
  AnchorResult a = anchor(x, s, p_norm);
  return AttnPolyResult{gsa(a.anchored, s, h, params), a.phase};
}

Tensor attention_with_bias(const Tensor& tokens, const AttentionParams& params,
                           const RelBias& bias, bool scale_by_sqrt_dk) {
  if (tokens.rank() != 2) throw std::invalid_argument("attention_with_bias: tokens must be [N,d]");
  if (bias.bias.dim(0) != tokens.dim(0)) {
    throw std::invalid_argument("attention_with_bias: bias size != token count");
  }
  check_params(params, tokens.dim(1), tokens.dim(1));
  return attention_core(tokens, tokens, params, scale_by_sqrt_dk, &bias.bias);
}

Tensor abs_pos_embed(const Tensor& x, const Tensor& e) {
  if (!x.same_shape(e)) throw std::invalid_argument("abs_pos_embed: shape mismatch");
  return add(x, e);
}

}  // namespace shifteq
