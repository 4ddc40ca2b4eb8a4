#include "shifteq/polyphase.hpp"

#include <stdexcept>
#include <string>

namespace shifteq {

namespace {

void check_stride(const Tensor& x, std::size_t s) {
  if (x.rank() < 2) throw std::invalid_argument("polyphase: tensor rank must be >= 2");
  if (s == 0) throw std::invalid_argument("polyphase: zero stride");
  if (x.height() % s != 0 || x.width() % s != 0) {
    throw std::invalid_argument("polyphase: stride " + std::to_string(s) +
                                " does not divide " + std::to_string(x.height()) + "x" +
                                std::to_string(x.width()));
  }
}

}  // namespace

Tensor polyphase_extract(const Tensor& x, PolyphaseIndex idx, std::size_t s) {
  check_stride(x, s);
  if (idx.p >= s || idx.q >= s) {
    throw std::invalid_argument("polyphase_extract: phase index out of range");
  }
  const std::size_t h = x.height(), w = x.width();
  const std::size_t oh = h / s, ow = w / s;
  const std::size_t planes = x.size() / (h * w);

  std::vector<std::size_t> shape = x.shape();
  shape[shape.size() - 2] = oh;
  shape[shape.size() - 1] = ow;
  Tensor out(std::move(shape));

  const double* src = x.data();
  double* dst = out.data();
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const double* sp = src + pl * h * w;
    double* dp = dst + pl * oh * ow;
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        dp[i * ow + j] = sp[(idx.p + s * i) * w + (idx.q + s * j)];
      }
    }
  }
  return out;
}

PolyphaseIndex max_polyphase(const Tensor& x, std::size_t s, int p_norm) {
  check_stride(x, s);
  PolyphaseIndex best{0, 0};
  double best_norm = -1.0;
  // Lexicographic scan; strict > keeps the smallest (p, q) on exact ties.
  for (std::size_t p = 0; p < s; ++p) {
    for (std::size_t q = 0; q < s; ++q) {
      const double n = lp_norm(polyphase_extract(x, {p, q}, s), p_norm);
      if (n > best_norm) {
        best_norm = n;
        best = {p, q};
      }
    }
  }
  return best;
}

bool unique_max_polyphase(const Tensor& x, std::size_t s, int p_norm) {
  check_stride(x, s);
  double best = -1.0;
  int at_best = 0;
  for (std::size_t p = 0; p < s; ++p) {
    for (std::size_t q = 0; q < s; ++q) {
      const double n = lp_norm(polyphase_extract(x, {p, q}, s), p_norm);
      if (n > best) {
        best = n;
        at_best = 1;
      } else if (n == best) {
        ++at_best;
      }
    }
  }
  return at_best == 1;
}

AnchorResult anchor(const Tensor& x, std::size_t s, int p_norm) {
  const PolyphaseIndex phase = max_polyphase(x, s, p_norm);
  Tensor anchored = circular_shift(
      x, Shift2D{-static_cast<long>(phase.p), -static_cast<long>(phase.q)});
  return AnchorResult{std::move(anchored), phase, s};
}

Tensor restore(const AnchorResult& r) { return restore(r.anchored, r.phase); }

Tensor restore(const Tensor& t, PolyphaseIndex phase) {
  return circular_shift(t, Shift2D{static_cast<long>(phase.p), static_cast<long>(phase.q)});
}

}  // namespace shifteq
