#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>

namespace chaoslab {

/// Spatial dimensions handled by the lab. Exact W1 is only cheap in low d.
inline constexpr int kMaxDim = 2;

/// A point or vector in R^d, d <= kMaxDim; unused trailing components are zero.
using Vec = std::array<double, kMaxDim>;

inline double norm(const Vec& v, int dim) noexcept {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) s += v[k] * v[k];
  return std::sqrt(s);
}

inline double distance(const Vec& a, const Vec& b, int dim) noexcept {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

/// Load point `i` from a flat row-major array with stride `dim`.
inline Vec point_at(std::span<const double> flat, std::size_t i, int dim) noexcept {
  Vec p{0.0, 0.0};
  for (int k = 0; k < dim; ++k) p[k] = flat[i * dim + k];
  return p;
}

/// Japanese bracket <x> = sqrt(1 + |x|^2) used by the weighted norms.
inline double bracket(std::span<const double> x) noexcept {
  double s = 1.0;
  for (double c : x) s += c * c;
  return std::sqrt(s);
}

}  // namespace chaoslab
