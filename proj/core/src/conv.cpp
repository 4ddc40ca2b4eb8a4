#include "shifteq/conv.hpp"

#include <stdexcept>
#include <string>

namespace shifteq {

namespace {

std::size_t wrap(long i, std::size_t m) {
  long r = i % static_cast<long>(m);
  if (r < 0) r += static_cast<long>(m);
  return static_cast<std::size_t>(r);
}

void check_input(const Tensor& x, const ConvFilter& f) {
  if (x.rank() != 3) throw std::invalid_argument("conv: input must be [C,H,W]");
  if (f.weights.rank() != 4) throw std::invalid_argument("conv: weights must be [Co,Ci,k,k]");
  if (f.in_channels() != x.dim(0)) {
    throw std::invalid_argument("conv: channel mismatch (" + std::to_string(f.in_channels()) +
                                " vs " + std::to_string(x.dim(0)) + ")");
  }
  if (f.kernel() != f.weights.dim(3)) {
    throw std::invalid_argument("conv: kernel must be square");
  }
  if (f.kernel() > x.height() || f.kernel() > x.width()) {
    throw std::invalid_argument("conv: kernel larger than input");
  }
  if (f.bias && (f.bias->rank() != 1 || f.bias->dim(0) != f.out_channels())) {
    throw std::invalid_argument("conv: bias must be [C_out]");
  }
}

// Shared kernel for the full and strided paths. Summation order over
// (c, u, v) is identical in both, which is what makes the
// strided == subsample(full) identity bit-exact.
Tensor conv_impl(const Tensor& x, const ConvFilter& f, std::size_t s) {
  const std::size_t ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t co = f.out_channels(), k = f.kernel();
  const long off = static_cast<long>((k - 1) / 2);
  const std::size_t oh = h / s, ow = w / s;

  Tensor out({co, oh, ow});
  for (std::size_t o = 0; o < co; ++o) {
    const double b = f.bias ? (*f.bias)[o] : 0.0;
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < ci; ++c) {
          for (std::size_t u = 0; u < k; ++u) {
            const std::size_t yi = wrap(static_cast<long>(s * i + u) - off, h);
            const double* xrow = x.data() + (c * h + yi) * w;
            const double* wrow = f.weights.data() + ((o * ci + c) * k + u) * k;
            for (std::size_t v = 0; v < k; ++v) {
              const std::size_t xj = wrap(static_cast<long>(s * j + v) - off, w);
              acc += wrow[v] * xrow[xj];
            }
          }
        }
        out(o, i, j) = acc + b;
      }
    }
  }
  return out;
}

}  // namespace

ConvFilter ConvFilter::identity(std::size_t channels, std::size_t k) {
  if (k % 2 == 0) throw std::invalid_argument("identity filter needs odd k");
  Tensor w({channels, channels, k, k});
  const std::size_t c0 = (k - 1) / 2;
  for (std::size_t c = 0; c < channels; ++c) w(c, c, c0, c0) = 1.0;
  return ConvFilter{std::move(w), 1, std::nullopt};
}

Tensor conv2d_circular(const Tensor& x, const ConvFilter& f) {
  check_input(x, f);
  if (f.stride != 1) {
    throw std::invalid_argument("conv2d_circular: filter stride must be 1");
  }
  return conv_impl(x, f, 1);
}

Tensor strided_conv(const Tensor& x, const ConvFilter& f, std::size_t s) {
  check_input(x, f);
  if (s == 0) throw std::invalid_argument("strided_conv: zero stride");
  if (f.stride != s) {
    throw std::invalid_argument("strided_conv: filter stride disagrees with s");
  }
  if (x.height() % s != 0 || x.width() % s != 0) {
    throw std::invalid_argument("strided_conv: stride does not divide input");
  }
  return conv_impl(x, f, s);
}

Tensor strided_conv(const Tensor& x, const ConvFilter& f) {
  return strided_conv(x, f, f.stride);
}

Tensor depthwise_conv_circular(const Tensor& x, const DepthwiseFilter& f) {
  if (x.rank() != 3) throw std::invalid_argument("depthwise: input must be [C,H,W]");
  if (f.weights.rank() != 3 || f.weights.dim(1) != f.weights.dim(2)) {
    throw std::invalid_argument("depthwise: weights must be [C,k,k]");
  }
  if (f.channels() != x.dim(0)) throw std::invalid_argument("depthwise: channel mismatch");
  if (f.kernel() % 2 == 0) throw std::invalid_argument("depthwise: kernel must be odd");

  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2), k = f.kernel();
  const long off = static_cast<long>((k - 1) / 2);
  Tensor out({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        double acc = 0.0;
        for (std::size_t u = 0; u < k; ++u) {
          const std::size_t yi = wrap(static_cast<long>(i + u) - off, h);
          const double* xrow = x.data() + (ch * h + yi) * w;
          const double* wrow = f.weights.data() + (ch * k + u) * k;
          for (std::size_t v = 0; v < k; ++v) {
            acc += wrow[v] * xrow[wrap(static_cast<long>(j + v) - off, w)];
          }
        }
        out(ch, i, j) = acc;
      }
    }
  }
  return out;
}

PatchEmbedResult patch_embed_poly(const Tensor& x, const ConvFilter& f, std::size_t s,
                                  int p_norm) {
  AnchorResult a = anchor(x, s, p_norm);
  return PatchEmbedResult{strided_conv(a.anchored, f, s), a.phase};
}

}  // namespace shifteq
