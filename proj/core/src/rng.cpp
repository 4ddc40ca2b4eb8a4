#include "shifteq/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace shifteq {

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace

std::uint64_t Rng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ull;
  return mix64(state_);
}

double Rng::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_normal() {
  // u1 in (0, 1] keeps the log finite.
  const double u1 = 1.0 - next_unit();
  const double u2 = next_unit();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::next_below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("Rng::next_below: zero bound");
  return next_u64() % bound;
}

Rng Rng::derive(std::uint64_t seed, std::string_view label) {
  return Rng(mix64(seed ^ fnv1a(label)));
}

Tensor rng_normal(Rng& r, std::vector<std::size_t> shape) {
  Tensor out(std::move(shape));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = r.next_normal();
  return out;
}

Tensor rng_lattice(Rng& r, std::vector<std::size_t> shape, int k) {
  if (k < 0 || k > 16) throw std::invalid_argument("rng_lattice: k out of range");
  const std::uint64_t span = (1ull << (k + 1)) + 1;  // values -2^k .. 2^k
  const double scale = std::ldexp(1.0, -k);
  Tensor out(std::move(shape));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const long j = static_cast<long>(r.next_below(span)) - (1l << k);
    out[i] = static_cast<double>(j) * scale;
  }
  return out;
}

}  // namespace shifteq
