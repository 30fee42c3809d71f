#include "chaoslab/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "chaoslab/errors.hpp"

namespace chaoslab::pde {

namespace {

constexpr double kCflSlack = 1.0 + 1e-12;

/// Backward-Euler diffusion along one line with no-flux ends: (I - lam Lap) u = rhs, in place.
void implicit_line(double* u, std::size_t stride, int n, double lam, std::vector<double>& c, std::vector<double>& d) {
  if (n == 1) return;
  c.resize(n);
  d.resize(n);
  // Thomas algorithm; sub/super diagonals are -lam, diagonal 1 + 2 lam (1 + lam at the ends)
  double diag = 1.0 + lam;
  c[0] = -lam / diag;
  d[0] = u[0] / diag;
  for (int i = 1; i < n; ++i) {
    diag = (i == n - 1 ? 1.0 + lam : 1.0 + 2.0 * lam) + lam * c[i - 1];
    c[i] = -lam / diag;
    d[i] = (u[static_cast<std::size_t>(i) * stride] + lam * d[i - 1]) / diag;
  }
  u[static_cast<std::size_t>(n - 1) * stride] = d[n - 1];
  for (int i = n - 2; i >= 0; --i) {
    u[static_cast<std::size_t>(i) * stride] = d[i] - c[i] * u[static_cast<std::size_t>(i + 1) * stride];
  }
}

void explicit_line_update(const double* u, double* out, std::size_t stride, int n, double lam) {
  for (int i = 0; i < n; ++i) {
    const double ui = u[static_cast<std::size_t>(i) * stride];
    double delta = 0.0;
    if (i > 0) delta += u[static_cast<std::size_t>(i - 1) * stride] - ui;
    if (i + 1 < n) delta += u[static_cast<std::size_t>(i + 1) * stride] - ui;
    out[static_cast<std::size_t>(i) * stride] += lam * delta;
  }
}

void diffuse(std::vector<double>& mass, int dim, int g, double lam, DiffusionScheme scheme) {
  if (lam == 0.0) return;
  std::vector<double> c, d;
  if (scheme == DiffusionScheme::implicit) {
    if (dim == 1) {
      implicit_line(mass.data(), 1, g, lam, c, d);
      return;
    }
    for (int j = 0; j < g; ++j) implicit_line(mass.data() + j, static_cast<std::size_t>(g), g, lam, c, d);
    for (int i = 0; i < g; ++i) implicit_line(mass.data() + static_cast<std::size_t>(i) * g, 1, g, lam, c, d);
    return;
  }
  if (2.0 * dim * lam > kCflSlack) {
    throw CflViolation("explicit diffusion needs 2 d D dt <= h^2 (got 2 d D dt / h^2 = " +
                       std::to_string(2.0 * dim * lam) + ")");
  }
  std::vector<double> out = mass;
  if (dim == 1) {
    explicit_line_update(mass.data(), out.data(), 1, g, lam);
  } else {
    for (int j = 0; j < g; ++j) explicit_line_update(mass.data() + j, out.data() + j, static_cast<std::size_t>(g), g, lam);
    for (int i = 0; i < g; ++i) {
      explicit_line_update(mass.data() + static_cast<std::size_t>(i) * g, out.data() + static_cast<std::size_t>(i) * g,
                           1, g, lam);
    }
  }
  mass.swap(out);
}

void check_advection_cfl(double max_speed, double dt, double h, int dim, const char* what) {
  if (2.0 * dim * max_speed * dt > h * kCflSlack) {
    throw CflViolation(std::string(what) + " needs 2 d sup|b| dt <= h (sup|b| = " + std::to_string(max_speed) +
                       ", dt = " + std::to_string(dt) + ", h = " + std::to_string(h) + ")");
  }
}

void check_options(double diffusion) {
  if (!(diffusion >= 0.0) || !std::isfinite(diffusion)) throw InvalidArgument("diffusion coefficient must be >= 0");
}

}  // namespace

void fp_step(GridDensity& density, const field::DriftField& drift, double dt, const FpOptions& options) {
  if (drift.dim() != density.dim) throw InvalidArgument("fp_step: drift and grid dimensions differ");
  if (!(dt > 0.0)) throw InvalidArgument("fp_step: dt must be positive");
  check_options(options.diffusion);
  const int g = density.cells_per_axis;
  const double h = density.cell_width();
  const double t = density.time;
  auto& m = density.mass;

  if (density.dim == 1) {
    if (g > 1) {
      std::vector<double> faces(static_cast<std::size_t>(g - 1));
      for (int i = 0; i + 1 < g; ++i) faces[i] = -density.half_width + (i + 1) * h;
      std::vector<double> b(faces.size());
      drift.eval_batch(t, faces, b);
      double sup = 0.0;
      for (double v : b) sup = std::max(sup, std::abs(v));
      check_advection_cfl(sup, dt, h, 1, "advection");
      const double ratio = dt / h;
      std::vector<double> flux(faces.size());
      for (int i = 0; i + 1 < g; ++i) flux[i] = ratio * (b[i] > 0.0 ? b[i] * m[i] : b[i] * m[i + 1]);
      for (int i = 0; i + 1 < g; ++i) {
        m[i] -= flux[i];
        m[i + 1] += flux[i];
      }
    }
  } else if (g > 1) {
    const auto gs = static_cast<std::size_t>(g);
    // faces normal to axis 0: between (i, j) and (i + 1, j)
    std::vector<double> fx(2 * (gs - 1) * gs), fy(2 * gs * (gs - 1));
    for (int i = 0; i + 1 < g; ++i) {
      for (int j = 0; j < g; ++j) {
        const std::size_t f = static_cast<std::size_t>(i) * gs + j;
        fx[2 * f] = -density.half_width + (i + 1) * h;
        fx[2 * f + 1] = density.center(j);
      }
    }
    for (int i = 0; i < g; ++i) {
      for (int j = 0; j + 1 < g; ++j) {
        const std::size_t f = static_cast<std::size_t>(i) * (gs - 1) + j;
        fy[2 * f] = density.center(i);
        fy[2 * f + 1] = -density.half_width + (j + 1) * h;
      }
    }
    std::vector<double> bx(fx.size()), by(fy.size());
    drift.eval_batch(t, fx, bx);
    drift.eval_batch(t, fy, by);
    double sup = 0.0;
    for (std::size_t f = 0; f < bx.size(); f += 2) sup = std::max(sup, std::abs(bx[f]));
    for (std::size_t f = 1; f < by.size(); f += 2) sup = std::max(sup, std::abs(by[f]));
    check_advection_cfl(sup, dt, h, 2, "advection");
    const double ratio = dt / h;
    std::vector<double> flux_x((gs - 1) * gs), flux_y(gs * (gs - 1));
    for (int i = 0; i + 1 < g; ++i) {
      for (int j = 0; j < g; ++j) {
        const std::size_t f = static_cast<std::size_t>(i) * gs + j;
        const double b = bx[2 * f];
        const std::size_t lo = static_cast<std::size_t>(i) * gs + j;
        flux_x[f] = ratio * (b > 0.0 ? b * m[lo] : b * m[lo + gs]);
      }
    }
    for (int i = 0; i < g; ++i) {
      for (int j = 0; j + 1 < g; ++j) {
        const std::size_t f = static_cast<std::size_t>(i) * (gs - 1) + j;
        const double b = by[2 * f + 1];
        const std::size_t lo = static_cast<std::size_t>(i) * gs + j;
        flux_y[f] = ratio * (b > 0.0 ? b * m[lo] : b * m[lo + 1]);
      }
    }
    for (int i = 0; i + 1 < g; ++i) {
      for (int j = 0; j < g; ++j) {
        const std::size_t f = static_cast<std::size_t>(i) * gs + j;
        m[f] -= flux_x[f];
        m[f + gs] += flux_x[f];
      }
    }
    for (int i = 0; i < g; ++i) {
      for (int j = 0; j + 1 < g; ++j) {
        const std::size_t f = static_cast<std::size_t>(i) * (gs - 1) + j;
        const std::size_t lo = static_cast<std::size_t>(i) * gs + j;
        m[lo] -= flux_y[f];
        m[lo + 1] += flux_y[f];
      }
    }
  }
  diffuse(m, density.dim, g, options.diffusion * dt / (h * h), options.scheme);
  density.time = t + dt;
}

GridDensity evolve_linear_fp(GridDensity density, const field::DriftField& drift, double dt, std::size_t steps,
                             const FpOptions& options) {
  for (std::size_t k = 0; k < steps; ++k) fp_step(density, drift, dt, options);
  return density;
}

std::vector<GridDensity> evolve_linear_fp_path(GridDensity density, const field::DriftField& drift, double dt,
                                               std::size_t steps, const FpOptions& options) {
  std::vector<GridDensity> path;
  path.reserve(steps + 1);
  path.push_back(density);
  for (std::size_t k = 0; k < steps; ++k) {
    fp_step(density, drift, dt, options);
    path.push_back(density);
  }
  return path;
}

McKeanPath evolve_mckean_path(GridDensity density, const field::Kernel& kernel, double dt, std::size_t steps,
                              const FpOptions& options) {
  McKeanPath out;
  out.drift = std::make_shared<field::GridSamples>();
  out.drift->dim = density.dim;
  out.drift->half_width = density.half_width;
  out.drift->nodes_per_axis = density.cells_per_axis;
  out.drift->dt = dt;
  out.densities.reserve(steps + 1);
  out.densities.push_back(density);
  for (std::size_t k = 0; k < steps; ++k) {
    auto slice = std::make_shared<field::GridSamples>();
    slice->dim = density.dim;
    slice->half_width = density.half_width;
    slice->nodes_per_axis = density.cells_per_axis;
    slice->dt = std::numeric_limits<double>::infinity();
    slice->slices.push_back(field::mean_field_values(kernel, density));
    out.drift->slices.push_back(slice->slices.front());
    fp_step(density, field::DriftField::grid(slice, std::numeric_limits<double>::infinity(), kernel.bound()), dt,
            options);
    out.densities.push_back(density);
  }
  return out;
}

GridDensity evolve_mckean(GridDensity density, const field::Kernel& kernel, double dt, std::size_t steps,
                          const FpOptions& options) {
  for (std::size_t k = 0; k < steps; ++k) {
    const auto b = field::mean_field_drift(kernel, density, std::numeric_limits<double>::infinity());
    fp_step(density, b, dt, options);
  }
  return density;
}

void kinetic_step(PhaseGridDensity& density, const KineticForce& force, double dt, const KineticOptions& options) {
  if (!(dt > 0.0)) throw InvalidArgument("kinetic_step: dt must be positive");
  check_options(options.diffusion);
  const int gx = density.cells_x;
  const int gv = density.cells_v;
  const auto gvs = static_cast<std::size_t>(gv);
  const double dx = density.dx();
  const double dv = density.dv();
  const double t = density.time;
  auto& m = density.mass;

  // force at x cell centers, from the x-marginal in the nonlinear case
  std::vector<double> bx(static_cast<std::size_t>(gx));
  if (const auto* kernel = std::get_if<field::Kernel>(&force)) {
    if (kernel->dim() != 1) throw InvalidArgument("kinetic equation is implemented for d = 1");
    bx = field::mean_field_values(*kernel, density.x_marginal());
  } else {
    const auto& drift = std::get<field::DriftField>(force);
    if (drift.dim() != 1) throw InvalidArgument("kinetic equation is implemented for d = 1");
    std::vector<double> xs(static_cast<std::size_t>(gx));
    for (int i = 0; i < gx; ++i) xs[i] = density.x_center(i);
    drift.eval_batch(t, xs, bx);
  }

  // transport in x by v
  if (density.half_width_v * dt > dx * kCflSlack) {
    throw CflViolation("kinetic transport needs sup|v| dt <= dx (sup|v| = " + std::to_string(density.half_width_v) +
                       ")");
  }
  for (int j = 0; j < gv; ++j) {
    const double v = density.v_center(j);
    const double ratio = v * dt / dx;
    if (v == 0.0 || gx == 1) continue;
    std::vector<double> flux(static_cast<std::size_t>(gx - 1));
    for (int i = 0; i + 1 < gx; ++i) {
      const std::size_t lo = static_cast<std::size_t>(i) * gvs + j;
      flux[i] = ratio * (v > 0.0 ? m[lo] : m[lo + gvs]);
    }
    for (int i = 0; i + 1 < gx; ++i) {
      const std::size_t lo = static_cast<std::size_t>(i) * gvs + j;
      m[lo] -= flux[i];
      m[lo + gvs] += flux[i];
    }
  }

  // drift in v by b(x) - kappa v
  if (gv > 1) {
    double sup = 0.0;
    for (int i = 0; i < gx; ++i) {
      for (int j = 0; j + 1 < gv; ++j) {
        const double vf = -density.half_width_v + (j + 1) * dv;
        sup = std::max(sup, std::abs(bx[i] - density.kappa * vf));
      }
    }
    check_advection_cfl(sup, dt, dv, 1, "kinetic velocity drift");
    std::vector<double> flux(gvs - 1);
    for (int i = 0; i < gx; ++i) {
      double* row = m.data() + static_cast<std::size_t>(i) * gvs;
      for (int j = 0; j + 1 < gv; ++j) {
        const double a = bx[i] - density.kappa * (-density.half_width_v + (j + 1) * dv);
        flux[j] = dt / dv * (a > 0.0 ? a * row[j] : a * row[j + 1]);
      }
      for (int j = 0; j + 1 < gv; ++j) {
        row[j] -= flux[j];
        row[j + 1] += flux[j];
      }
    }
  }

  // diffusion in v
  const double lam = options.diffusion * dt / (dv * dv);
  if (lam > 0.0) {
    if (options.scheme == DiffusionScheme::explicit_euler && 2.0 * lam > kCflSlack) {
      throw CflViolation("explicit velocity diffusion needs 2 D dt <= dv^2");
    }
    std::vector<double> c, d, out;
    for (int i = 0; i < gx; ++i) {
      double* row = m.data() + static_cast<std::size_t>(i) * gvs;
      if (options.scheme == DiffusionScheme::implicit) {
        implicit_line(row, 1, gv, lam, c, d);
      } else {
        out.assign(row, row + gv);
        explicit_line_update(row, out.data(), 1, gv, lam);
        std::copy(out.begin(), out.end(), row);
      }
    }
  }
  density.time = t + dt;

  double edge = 0.0;
  for (int i = 0; i < gx; ++i) {
    for (int j = 0; j < gv; ++j) {
      if (i == 0 || i == gx - 1 || j == 0 || j == gv - 1) edge += m[static_cast<std::size_t>(i) * gvs + j];
    }
  }
  if (edge > options.boundary_tolerance) {
    throw DomainTooSmall("phase grid boundary holds mass " + std::to_string(edge) + " at t = " +
                         std::to_string(density.time));
  }
}

PhaseGridDensity evolve_kinetic(PhaseGridDensity density, const KineticForce& force, double dt, std::size_t steps,
                                const KineticOptions& options) {
  for (std::size_t k = 0; k < steps; ++k) kinetic_step(density, force, dt, options);
  return density;
}

std::vector<PhaseGridDensity> evolve_kinetic_path(PhaseGridDensity density, const KineticForce& force, double dt,
                                                  std::size_t steps, const KineticOptions& options) {
  std::vector<PhaseGridDensity> path;
  path.reserve(steps + 1);
  path.push_back(density);
  for (std::size_t k = 0; k < steps; ++k) {
    kinetic_step(density, force, dt, options);
    path.push_back(density);
  }
  return path;
}

double weighted_norm(const GridDensity& density, double r, double q) {
  if (q != 1.0 && q != 2.0) throw InvalidArgument("weighted_norm: order q must be 1 or 2");
  if (!(r >= 0.0)) throw InvalidArgument("weighted_norm: weight exponent must be >= 0");
  const double vol = density.cell_volume();
  double s = 0.0;
  for (std::size_t c = 0; c < density.cell_count(); ++c) {
    const Vec x = density.cell_center(c);
    const double w = std::pow(bracket(std::span<const double>(x.data(), static_cast<std::size_t>(density.dim))), r * q);
    const double f = std::abs(density.mass[c]) / vol;
    s += (q == 1.0 ? f : f * f) * w * vol;
  }
  return q == 1.0 ? s : std::sqrt(s);
}

double weighted_norm(const PhaseGridDensity& density, double r, double q) {
  if (q != 1.0 && q != 2.0) throw InvalidArgument("weighted_norm: order q must be 1 or 2");
  if (!(r >= 0.0)) throw InvalidArgument("weighted_norm: weight exponent must be >= 0");
  const double vol = density.dx() * density.dv();
  double s = 0.0;
  for (int i = 0; i < density.cells_x; ++i) {
    for (int j = 0; j < density.cells_v; ++j) {
      const double z[2] = {density.x_center(i), density.v_center(j)};
      const double w = std::pow(bracket(z), r * q);
      const double f = std::abs(density.mass[static_cast<std::size_t>(i) * density.cells_v + j]) / vol;
      s += (q == 1.0 ? f : f * f) * w * vol;
    }
  }
  return q == 1.0 ? s : std::sqrt(s);
}

GridDensity difference(const GridDensity& f, const GridDensity& g) {
  if (f.dim != g.dim || f.cells_per_axis != g.cells_per_axis || f.half_width != g.half_width) {
    throw InvalidArgument("difference: densities live on different grids");
  }
  GridDensity out = f;
  for (std::size_t c = 0; c < out.mass.size(); ++c) out.mass[c] = f.mass[c] - g.mass[c];
  return out;
}

double dual_exponent(double q) {
  if (std::isinf(q)) return 2.0;
  if (!(q > 2.0)) throw InvalidArgument("energy estimate needs q > 2");
  return 2.0 * q / (q - 2.0);
}

EnergyReport verify_energy_estimate(const field::DriftField& b, const field::DriftField& b_tilde,
                                    const GridDensity& f0, double horizon, double dt, const EnergyWeights& weights,
                                    const FpOptions& options) {
  if (b.dim() != f0.dim || b_tilde.dim() != f0.dim) throw InvalidArgument("energy estimate: dimension mismatch");
  const double qd = dual_exponent(weights.q);
  const double ratio = horizon / dt;
  const auto steps = static_cast<std::size_t>(std::llround(ratio));
  if (std::abs(ratio - static_cast<double>(steps)) > 1e-9 * std::max(1.0, ratio)) {
    throw InvalidArgument("energy estimate: horizon must be a whole number of steps");
  }
  const auto centers = f0.centers();
  const auto d = static_cast<std::size_t>(f0.dim);
  const double vol = f0.cell_volume();
  std::vector<double> wts(f0.cell_count());
  for (std::size_t c = 0; c < wts.size(); ++c) {
    wts[c] = std::pow(bracket(std::span<const double>(centers).subspan(c * d, d)), -weights.r * qd);
  }

  EnergyReport rep;
  GridDensity f = f0, g = f0;
  double integral = 0.0;
  std::vector<double> vb(centers.size()), vt(centers.size());
  rep.times.push_back(f0.time);
  rep.lhs.push_back(weighted_norm(difference(f, g), weights.p, 2.0));
  rep.rhs.push_back(0.0);
  rep.lhs_zero_at_start = rep.lhs.front() == 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = f.time;
    b.eval_batch(t, centers, vb);
    b_tilde.eval_batch(t, centers, vt);
    double s = 0.0;
    for (std::size_t c = 0; c < wts.size(); ++c) {
      double diff2 = 0.0;
      for (std::size_t a = 0; a < d; ++a) diff2 += (vb[c * d + a] - vt[c * d + a]) * (vb[c * d + a] - vt[c * d + a]);
      s += std::pow(std::sqrt(diff2), qd) * wts[c] * vol;
    }
    integral += dt * std::pow(s, 1.0 / qd);
    fp_step(f, b, dt, options);
    fp_step(g, b_tilde, dt, options);
    rep.times.push_back(f.time);
    rep.lhs.push_back(weighted_norm(difference(f, g), weights.p, 2.0));
    rep.rhs.push_back(integral);
  }
  if (!rep.lhs_zero_at_start) ++rep.violations;
  for (std::size_t k = 1; k < rep.times.size(); ++k) {
    if (!std::isfinite(rep.lhs[k])) {
      ++rep.violations;
    } else if (rep.rhs[k] > 0.0) {
      rep.fitted_constant = std::max(rep.fitted_constant, rep.lhs[k] / rep.rhs[k]);
    } else if (rep.lhs[k] > 1e-13) {
      ++rep.violations;
    }
  }
  return rep;
}

}  // namespace chaoslab::pde
