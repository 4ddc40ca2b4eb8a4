#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace shifteq {

/// Integer spatial translation acting circularly on the last two axes of a
/// tensor. dy moves rows downward, dx moves columns rightward. Shifting by a
/// full period is the identity; shifts compose additively modulo (H, W).
struct Shift2D {
  long dy = 0;
  long dx = 0;

  friend bool operator==(const Shift2D&, const Shift2D&) = default;
};

/// Dense row-major array of 64-bit floats with an explicit shape.
///
/// Canonical layouts used throughout the library: token matrices [N, d],
/// image grids [C, H, W]. All arithmetic on tensors is deterministic:
/// identical inputs produce bit-identical outputs (fixed summation orders,
/// no parallel reductions).
class Tensor {
 public:
  Tensor() = default;

  /// Zero-filled tensor of the given shape.
  explicit Tensor(std::vector<std::size_t> shape);

  /// Takes ownership of a row-major buffer; data.size() must equal the
  /// product of the shape.
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  /// 2-D literal convenience, mostly for tests and small fixtures.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_[axis]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Multi-index access; the number of indices must match the rank.
  template <typename... Ix>
  double& operator()(Ix... ix) {
    return data_[offset({static_cast<std::size_t>(ix)...})];
  }
  template <typename... Ix>
  double operator()(Ix... ix) const {
    return data_[offset({static_cast<std::size_t>(ix)...})];
  }

  /// Height/width of the trailing two axes. Requires rank >= 2.
  std::size_t height() const;
  std::size_t width() const;

  /// Same buffer under a new shape; element count must be preserved.
  Tensor reshaped(std::vector<std::size_t> shape) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t offset(std::initializer_list<std::size_t> ix) const;

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// out[..., i, j] = t[..., (i - dy) mod H, (j - dx) mod W]. Shape preserved.
/// Throws std::invalid_argument for rank < 2.
Tensor circular_shift(const Tensor& t, Shift2D s);

/// Standard [N, k] x [k, m] product. Accumulation in 64-bit floats with the
/// inner index ascending, so results are bit-reproducible.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Row-wise softmax of an [N, m] matrix, computed max-subtracted. Each output
/// row is nonnegative and sums to 1 within 1e-12.
/// Throws std::domain_error if the input contains NaN.
Tensor softmax_rows(const Tensor& t);

/// Lp norm over all elements, p in {1, 2}. The reduction uses compensated
/// (Neumaier) accumulation, making the result independent of traversal order
/// on inputs whose partial sums are exactly representable.
double lp_norm(const Tensor& t, int p = 2);

/// Elementwise helpers. Shapes must match for add/sub.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scaled(const Tensor& t, double alpha);

/// Canonical reshape between image grids and token matrices.
/// grid_to_tokens: [C, H, W] -> [H*W, C] with token n = i*W + j (row-major).
Tensor grid_to_tokens(const Tensor& grid);
/// tokens_to_grid: [N, C] -> [C, H, W] with N = H*W.
Tensor tokens_to_grid(const Tensor& tokens, std::size_t h, std::size_t w);

/// Compensated (Neumaier) sum of a buffer, ascending index order.
double compensated_sum(const double* first, std::size_t n);

}  // namespace shifteq
