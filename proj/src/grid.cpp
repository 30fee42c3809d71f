#include "chaoslab/grid.hpp"

#include "chaoslab/errors.hpp"

namespace chaoslab {

GridDensity::GridDensity(int dim_, double half_width_, int cells_per_axis_)
    : dim(dim_), half_width(half_width_), cells_per_axis(cells_per_axis_) {
  if (dim < 1 || dim > kMaxDim) throw InvalidArgument("grid dimension must be 1 or 2");
  if (!(half_width > 0.0)) throw InvalidArgument("grid half-width must be positive");
  if (cells_per_axis < 1) throw InvalidArgument("grid needs at least one cell per axis");
  std::size_t n = 1;
  for (int k = 0; k < dim; ++k) n *= static_cast<std::size_t>(cells_per_axis);
  mass.assign(n, 0.0);
}

double GridDensity::cell_volume() const noexcept {
  double v = 1.0;
  for (int k = 0; k < dim; ++k) v *= cell_width();
  return v;
}

Vec GridDensity::cell_center(std::size_t cell) const noexcept {
  if (dim == 1) return {center(static_cast<int>(cell)), 0.0};
  const auto g = static_cast<std::size_t>(cells_per_axis);
  return {center(static_cast<int>(cell / g)), center(static_cast<int>(cell % g))};
}

std::vector<double> GridDensity::centers() const {
  std::vector<double> out(mass.size() * static_cast<std::size_t>(dim));
  for (std::size_t c = 0; c < mass.size(); ++c) {
    const Vec p = cell_center(c);
    for (int k = 0; k < dim; ++k) out[c * dim + k] = p[k];
  }
  return out;
}

double GridDensity::total_mass() const noexcept {
  double s = 0.0;
  for (double m : mass) s += m;
  return s;
}

Vec GridDensity::mean() const noexcept {
  Vec m{0.0, 0.0};
  for (std::size_t c = 0; c < mass.size(); ++c) {
    const Vec p = cell_center(c);
    for (int k = 0; k < dim; ++k) m[k] += mass[c] * p[k];
  }
  return m;
}

double GridDensity::variance(int axis) const noexcept {
  const double mu = mean()[axis];
  double s = 0.0;
  for (std::size_t c = 0; c < mass.size(); ++c) {
    const double z = cell_center(c)[axis] - mu;
    s += mass[c] * z * z;
  }
  return s;
}

PhaseGridDensity::PhaseGridDensity(double lx, double lv, int gx, int gv, double kappa_)
    : half_width_x(lx), half_width_v(lv), cells_x(gx), cells_v(gv), kappa(kappa_) {
  if (!(lx > 0.0) || !(lv > 0.0)) throw InvalidArgument("phase grid half-widths must be positive");
  if (gx < 1 || gv < 1) throw InvalidArgument("phase grid needs at least one cell per axis");
  if (!(kappa >= 0.0)) throw InvalidArgument("friction kappa must be non-negative");
  mass.assign(static_cast<std::size_t>(gx) * static_cast<std::size_t>(gv), 0.0);
}

double PhaseGridDensity::total_mass() const noexcept {
  double s = 0.0;
  for (double m : mass) s += m;
  return s;
}

GridDensity PhaseGridDensity::x_marginal() const {
  GridDensity g(1, half_width_x, cells_x);
  g.time = time;
  for (int i = 0; i < cells_x; ++i) {
    double s = 0.0;
    for (int j = 0; j < cells_v; ++j) s += mass[static_cast<std::size_t>(i) * cells_v + j];
    g.mass[i] = s;
  }
  return g;
}

GridDensity PhaseGridDensity::v_marginal() const {
  GridDensity g(1, half_width_v, cells_v);
  g.time = time;
  for (int i = 0; i < cells_x; ++i) {
    for (int j = 0; j < cells_v; ++j) g.mass[j] += mass[static_cast<std::size_t>(i) * cells_v + j];
  }
  return g;
}

}  // namespace chaoslab
