#pragma once

#include <cstddef>
#include <vector>

#include "chaoslab/geometry.hpp"

namespace chaoslab {

/// Cell masses of a probability density on the truncated box [-L, L]^d, G cells per axis.
/// Cells are stored row-major with the last axis fastest.
struct GridDensity {
  int dim = 1;
  double half_width = 1.0;
  int cells_per_axis = 1;
  std::vector<double> mass;
  double time = 0.0;

  GridDensity() = default;
  GridDensity(int dim, double half_width, int cells_per_axis);

  double cell_width() const noexcept { return 2.0 * half_width / cells_per_axis; }
  double cell_volume() const noexcept;
  std::size_t cell_count() const noexcept { return mass.size(); }
  double center(int index) const noexcept { return -half_width + (index + 0.5) * cell_width(); }
  Vec cell_center(std::size_t cell) const noexcept;
  /// Cell centers, flat with stride dim.
  std::vector<double> centers() const;
  double total_mass() const noexcept;
  Vec mean() const noexcept;
  /// Second central moment along one axis.
  double variance(int axis = 0) const noexcept;
};

/// Phase-space density f(x, v) for d = 1 on [-Lx, Lx] x [-Lv, Lv]; mass[ix * Gv + iv].
struct PhaseGridDensity {
  double half_width_x = 1.0;
  double half_width_v = 1.0;
  int cells_x = 1;
  int cells_v = 1;
  double kappa = 0.0;
  std::vector<double> mass;
  double time = 0.0;

  PhaseGridDensity() = default;
  PhaseGridDensity(double half_width_x, double half_width_v, int cells_x, int cells_v, double kappa);

  double dx() const noexcept { return 2.0 * half_width_x / cells_x; }
  double dv() const noexcept { return 2.0 * half_width_v / cells_v; }
  double x_center(int i) const noexcept { return -half_width_x + (i + 0.5) * dx(); }
  double v_center(int j) const noexcept { return -half_width_v + (j + 0.5) * dv(); }
  double total_mass() const noexcept;
  GridDensity x_marginal() const;
  GridDensity v_marginal() const;
};

}  // namespace chaoslab
