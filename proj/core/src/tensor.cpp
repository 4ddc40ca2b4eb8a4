#include "shifteq/tensor.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace shifteq {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t axis : shape) {
    if (axis == 0) throw std::invalid_argument("tensor: zero-length axis");
    n *= axis;
  }
  return n;
}

// Mathematical modulo, result in [0, m).
std::size_t wrap(long i, std::size_t m) {
  long r = i % static_cast<long>(m);
  if (r < 0) r += static_cast<long>(m);
  return static_cast<std::size_t>(r);
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_product(shape_)) {
    throw std::invalid_argument("tensor: data length does not match shape");
  }
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t n = rows.size();
  std::size_t m = n == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(n * m);
  for (const auto& row : rows) {
    if (row.size() != m) throw std::invalid_argument("tensor: ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({n, m}, std::move(data));
}

std::size_t Tensor::height() const {
  if (rank() < 2) throw std::invalid_argument("tensor: rank < 2 has no height");
  return shape_[rank() - 2];
}

std::size_t Tensor::width() const {
  if (rank() < 2) throw std::invalid_argument("tensor: rank < 2 has no width");
  return shape_[rank() - 1];
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  if (shape_product(shape) != data_.size()) {
    throw std::invalid_argument("tensor: reshape changes element count");
  }
  return Tensor(std::move(shape), data_);
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> ix) const {
  std::size_t off = 0;
  std::size_t axis = 0;
  for (std::size_t i : ix) {
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

Tensor circular_shift(const Tensor& t, Shift2D s) {
  if (t.rank() < 2) {
    throw std::invalid_argument("circular_shift: tensor rank must be >= 2");
  }
  const std::size_t h = t.height();
  const std::size_t w = t.width();
  const std::size_t planes = t.size() / (h * w);

  Tensor out(t.shape());
  const double* src = t.data();
  double* dst = out.data();
  for (std::size_t p = 0; p < planes; ++p) {
    const double* sp = src + p * h * w;
    double* dp = dst + p * h * w;
    for (std::size_t i = 0; i < h; ++i) {
      const std::size_t si = wrap(static_cast<long>(i) - s.dy, h);
      for (std::size_t j = 0; j < w; ++j) {
        const std::size_t sj = wrap(static_cast<long>(j) - s.dx, w);
        dp[i * w + j] = sp[si * w + sj];
      }
    }
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw std::invalid_argument("matmul: operands must be rank-2");
  }
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  if (b.dim(0) != k) {
    throw std::invalid_argument("matmul: inner dimensions disagree (" +
                                std::to_string(k) + " vs " + std::to_string(b.dim(0)) + ")");
  }
  Tensor out({n, m});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  // i,l,j nesting keeps the per-element accumulation over l ascending while
  // the inner loop stays contiguous.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      const double ail = pa[i * k + l];
      const double* brow = pb + l * m;
      double* orow = po + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += ail * brow[j];
    }
  }
  return out;
}

Tensor softmax_rows(const Tensor& t) {
  if (t.rank() != 2) throw std::invalid_argument("softmax_rows: expected rank-2");
  const std::size_t n = t.dim(0), m = t.dim(1);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::isnan(t[i])) throw std::domain_error("softmax_rows: NaN input");
  }
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = t.data() + i * m;
    double* orow = out.data() + i * m;
    double mx = row[0];
    for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      orow[j] = std::exp(row[j] - mx);
      denom += orow[j];
    }
    for (std::size_t j = 0; j < m; ++j) orow[j] /= denom;
  }
  return out;
}

double compensated_sum(const double* first, std::size_t n) {
  double sum = 0.0;
  double comp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = first[i];
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

double lp_norm(const Tensor& t, int p) {
  if (p != 1 && p != 2) throw std::invalid_argument("lp_norm: p must be 1 or 2");
  double sum = 0.0;
  double comp = 0.0;
  const double* d = t.data();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double x = p == 1 ? std::abs(d[i]) : d[i] * d[i];
    const double s = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - s) + x;
    } else {
      comp += (x - s) + sum;
    }
    sum = s;
  }
  sum += comp;
  return p == 1 ? sum : std::sqrt(sum);
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("add: shape mismatch");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("sub: shape mismatch");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Tensor scaled(const Tensor& t, double alpha) {
  Tensor out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = alpha * t[i];
  return out;
}

Tensor grid_to_tokens(const Tensor& grid) {
  if (grid.rank() != 3) throw std::invalid_argument("grid_to_tokens: expected [C,H,W]");
  const std::size_t c = grid.dim(0), h = grid.dim(1), w = grid.dim(2);
  Tensor out({h * w, c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        out(i * w + j, ch) = grid(ch, i, j);
      }
    }
  }
  return out;
}

Tensor tokens_to_grid(const Tensor& tokens, std::size_t h, std::size_t w) {
  if (tokens.rank() != 2) throw std::invalid_argument("tokens_to_grid: expected [N,C]");
  if (tokens.dim(0) != h * w) {
    throw std::invalid_argument("tokens_to_grid: token count does not match grid");
  }
  const std::size_t c = tokens.dim(1);
  Tensor out({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        out(ch, i, j) = tokens(i * w + j, ch);
      }
    }
  }
  return out;
}

}  // namespace shifteq
