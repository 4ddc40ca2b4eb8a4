#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>

#include "shifteq/conv.hpp"
#include "shifteq/polyphase.hpp"
#include "shifteq/rng.hpp"
#include "shifteq/tensor.hpp"

using namespace shifteq;

namespace {

std::size_t wrap(long i, std::size_t m) {
  long r = i % static_cast<long>(m);
  if (r < 0) r += static_cast<long>(m);
  return static_cast<std::size_t>(r);
}

// Reference cross-correlation with the same (c, u, v) accumulation order, so
// agreement is exact.
Tensor conv_ref(const Tensor& x, const Tensor& weights, std::size_t s) {
  const std::size_t ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t co = weights.dim(0), k = weights.dim(2);
  const long off = static_cast<long>((k - 1) / 2);
  Tensor out({co, h / s, w / s});
  for (std::size_t o = 0; o < co; ++o) {
    for (std::size_t i = 0; i < h / s; ++i) {
      for (std::size_t j = 0; j < w / s; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < ci; ++c) {
          for (std::size_t u = 0; u < k; ++u) {
            for (std::size_t v = 0; v < k; ++v) {
              acc += weights(o, c, u, v) *
                     x(c, wrap(static_cast<long>(s * i + u) - off, h),
                       wrap(static_cast<long>(s * j + v) - off, w));
            }
          }
        }
        out(o, i, j) = acc;
      }
    }
  }
  return out;
}

Tensor ones_tensor(std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 1.0;
  return t;
}

Tensor iota_grid() {
  Tensor t({1, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) t[i] = static_cast<double>(i);
  return t;
}

}  // namespace

TEST_CASE("identity filter reproduces the input") {
  Rng r(3);
  const Tensor x = rng_normal(r, {3, 5, 5});
  CHECK(conv2d_circular(x, ConvFilter::identity(3)) == x);
  CHECK(conv2d_circular(x, ConvFilter::identity(3, 3)) == x);
  CHECK_THROWS_AS(ConvFilter::identity(2, 2), std::invalid_argument);
}

TEST_CASE("all-ones 3x3 kernel sums the wrapped neighborhood") {
  Tensor x({1, 4, 4});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.5;
  const ConvFilter f{ones_tensor({1, 1, 3, 3}), 1, std::nullopt};
  const Tensor y = conv2d_circular(x, f);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == 4.5);
}

TEST_CASE("conv matches the quadruple-loop reference exactly") {
  Rng r(13);
  const Tensor x = rng_normal(r, {2, 6, 6});
  const Tensor w = rng_normal(r, {3, 2, 3, 3});
  CHECK(conv2d_circular(x, ConvFilter{w, 1, std::nullopt}) == conv_ref(x, w, 1));
  CHECK(strided_conv(x, ConvFilter{w, 2, std::nullopt}, 2) == conv_ref(x, w, 2));
}

TEST_CASE("bias adds per output channel") {
  Rng r(41);
  const Tensor x = rng_normal(r, {2, 4, 4});
  ConvFilter f = ConvFilter::identity(2);
  f.bias = Tensor({2}, {1.5, -2.0});
  const Tensor y = conv2d_circular(x, f);
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(y[i] == x[i] + 1.5);
    CHECK(y[16 + i] == x[16 + i] - 2.0);
  }
  f.bias = Tensor({3});
  CHECK_THROWS_AS(conv2d_circular(x, f), std::invalid_argument);
}

TEST_CASE("filter and stride contracts") {
  Rng r(43);
  const Tensor x = rng_normal(r, {2, 4, 4});
  const Tensor w = rng_normal(r, {2, 2, 2, 2});
  CHECK_THROWS_AS(conv2d_circular(x, ConvFilter{w, 2, std::nullopt}), std::invalid_argument);
  CHECK_THROWS_AS(strided_conv(x, ConvFilter{w, 1, std::nullopt}, 2), std::invalid_argument);
  CHECK_THROWS_AS(strided_conv(x, ConvFilter{w, 0, std::nullopt}, 0), std::invalid_argument);
  CHECK_THROWS_AS(strided_conv(x, ConvFilter{w, 3, std::nullopt}, 3), std::invalid_argument);

  const Tensor w1 = rng_normal(r, {2, 1, 2, 2});  // channel mismatch
  CHECK_THROWS_AS(conv2d_circular(x, ConvFilter{w1, 1, std::nullopt}), std::invalid_argument);
  const Tensor wr = rng_normal(r, {2, 2, 2, 3});  // non-square kernel
  CHECK_THROWS_AS(conv2d_circular(x, ConvFilter{wr, 1, std::nullopt}), std::invalid_argument);
  const Tensor wb = rng_normal(r, {2, 2, 5, 5});  // kernel larger than input
  CHECK_THROWS_AS(conv2d_circular(x, ConvFilter{wb, 1, std::nullopt}), std::invalid_argument);
  CHECK_THROWS_AS(conv2d_circular(x.reshaped({2, 16}), ConvFilter{w, 1, std::nullopt}),
                  std::invalid_argument);
}

TEST_CASE("stride-1 circular conv commutes with shifts bit-exactly") {
  Rng r(19);
  const Tensor x = rng_normal(r, {2, 5, 7});
  const ConvFilter f{rng_normal(r, {2, 2, 3, 3}), 1, std::nullopt};
  const Tensor y = conv2d_circular(x, f);
  for (long dy : {0L, 1L, 3L, 4L}) {
    for (long dx : {0L, 2L, 6L}) {
      CHECK(conv2d_circular(circular_shift(x, {dy, dx}), f) == circular_shift(y, {dy, dx}));
    }
  }
}

TEST_CASE("strided conv equals subsampling the full conv") {
  Rng r(29);
  const Tensor x = rng_normal(r, {2, 8, 8});
  const Tensor w = rng_normal(r, {3, 2, 2, 2});
  const ConvFilter full{w, 1, std::nullopt};
  CHECK(strided_conv(x, ConvFilter{w, 2, std::nullopt}, 2) ==
        polyphase_extract(conv2d_circular(x, full), {0, 0}, 2));
  CHECK(strided_conv(x, full, 1) == conv2d_circular(x, full));
}

TEST_CASE("2x2 ones filter at stride 2 sums whole patches") {
  const ConvFilter f{ones_tensor({1, 1, 2, 2}), 2, std::nullopt};
  CHECK(strided_conv(iota_grid(), f) == Tensor({1, 2, 2}, {10, 18, 42, 50}));
}

TEST_CASE("strided conv alone is not shift equivariant") {
  const ConvFilter f{ones_tensor({1, 1, 2, 2}), 2, std::nullopt};
  const Tensor base = strided_conv(iota_grid(), f);
  const Tensor moved = strided_conv(circular_shift(iota_grid(), {1, 0}), f);
  double best = 1e300;
  for (long dy = 0; dy < 2; ++dy) {
    for (long dx = 0; dx < 2; ++dx) {
      best = std::min(best, lp_norm(sub(moved, circular_shift(base, {dy, dx})), 2));
    }
  }
  CHECK(best > 1e-3);  // no output shift explains the sub-stride input shift
}

TEST_CASE("depthwise conv: delta kernels and channel isolation") {
  Rng r(53);
  const Tensor x = rng_normal(r, {2, 4, 4});

  Tensor delta({2, 3, 3});
  delta(0, 1, 1) = 1.0;
  delta(1, 1, 1) = 1.0;
  CHECK(depthwise_conv_circular(x, DepthwiseFilter{delta}) == x);

  Tensor mixed = rng_normal(r, {2, 3, 3});
  for (std::size_t i = 0; i < 9; ++i) mixed[9 + i] = 0.0;  // zero kernel on channel 1
  const Tensor y = depthwise_conv_circular(x, DepthwiseFilter{mixed});
  for (std::size_t i = 0; i < 16; ++i) CHECK(y[16 + i] == 0.0);

  // channel 0 equals a single-channel full conv with the same kernel
  Tensor x0({1, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) x0[i] = x[i];
  Tensor w0({1, 1, 3, 3});
  for (std::size_t i = 0; i < 9; ++i) w0[i] = mixed[i];
  const Tensor y0 = conv2d_circular(x0, ConvFilter{w0, 1, std::nullopt});
  for (std::size_t i = 0; i < 16; ++i) CHECK(y[i] == y0[i]);

  CHECK_THROWS_AS(depthwise_conv_circular(x, DepthwiseFilter{Tensor({2, 2, 2})}),
                  std::invalid_argument);
  CHECK_THROWS_AS(depthwise_conv_circular(x, DepthwiseFilter{Tensor({3, 3, 3})}),
                  std::invalid_argument);
  CHECK_THROWS_AS(depthwise_conv_circular(x, DepthwiseFilter{Tensor({2, 3, 5})}),
                  std::invalid_argument);
}

TEST_CASE("depthwise conv commutes with shifts bit-exactly") {
  Rng r(59);
  const Tensor x = rng_normal(r, {3, 6, 6});
  const DepthwiseFilter f{rng_normal(r, {3, 3, 3})};
  const Tensor y = depthwise_conv_circular(x, f);
  for (long dy : {1L, 4L}) {
    for (long dx : {0L, 5L}) {
      CHECK(depthwise_conv_circular(circular_shift(x, {dy, dx}), f) ==
            circular_shift(y, {dy, dx}));
    }
  }
}

TEST_CASE("patch embedding anchors before the strided conv") {
  Rng r(61);
  Tensor x = rng_lattice(r, {2, 8, 8}, 2);
  while (!unique_max_polyphase(x, 2)) x = rng_lattice(r, {2, 8, 8}, 2);
  const ConvFilter f{rng_normal(r, {4, 2, 2, 2}), 2, std::nullopt};

  const PatchEmbedResult base = patch_embed_poly(x, f, 2);
  CHECK(base.out == strided_conv(anchor(x, 2).anchored, f, 2));

  // shifting the input moves the token grid by the whole-stride residue
  for (long dy = 0; dy < 8; ++dy) {
    for (long dx = 0; dx < 8; ++dx) {
      const PatchEmbedResult sh = patch_embed_poly(circular_shift(x, {dy, dx}), f, 2);
      const long ry = dy + static_cast<long>(base.phase.p) - static_cast<long>(sh.phase.p);
      const long rx = dx + static_cast<long>(base.phase.q) - static_cast<long>(sh.phase.q);
      REQUIRE(ry % 2 == 0);
      REQUIRE(rx % 2 == 0);
      CHECK(sh.out == circular_shift(base.out, {ry / 2, rx / 2}));
    }
  }
}

TEST_CASE("patch embedding with a constant input keeps phase (0,0)") {
  Tensor x({1, 4, 4});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 2.0;
  Rng r(67);
  const ConvFilter f{rng_normal(r, {3, 1, 2, 2}), 2, std::nullopt};
  const PatchEmbedResult res = patch_embed_poly(x, f, 2);
  CHECK(res.phase == PolyphaseIndex{0, 0});
  CHECK(res.out == strided_conv(x, f, 2));
}

TEST_CASE("whole-image patches collapse to one invariant token") {
  Rng r(71);
  Tensor x = rng_normal(r, {1, 4, 4});
  const ConvFilter f{rng_normal(r, {2, 1, 4, 4}), 4, std::nullopt};
  const Tensor base = patch_embed_poly(x, f, 4).out;
  CHECK(base.shape() == std::vector<std::size_t>{2, 1, 1});
  for (long dy : {1L, 2L, 3L}) {
    CHECK(patch_embed_poly(circular_shift(x, {dy, 3 - dy}), f, 4).out == base);
  }
}
