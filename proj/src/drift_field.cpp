#include "chaoslab/drift_field.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "chaoslab/errors.hpp"
#include "chaoslab/rng.hpp"

namespace chaoslab::field {

namespace {

constexpr std::array<std::uint32_t, 36> kPrimes{2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37,
                                                41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
                                                97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151};

Vec interpolate(const GridSamples& g, const std::vector<double>& slice, const Vec& x) {
  const double h = 2.0 * g.half_width / g.nodes_per_axis;
  const int n = g.nodes_per_axis;
  auto locate = [&](double coord, int& i, double& w) {
    const double u = (coord + g.half_width) / h - 0.5;
    if (!(u > 0.0)) {
      i = 0;
      w = 0.0;
    } else if (u >= n - 1) {
      i = std::max(n - 2, 0);
      w = n > 1 ? 1.0 : 0.0;
    } else {
      i = static_cast<int>(u);
      w = u - i;
    }
  };
  Vec out{0.0, 0.0};
  if (g.dim == 1) {
    int i = 0;
    double w = 0.0;
    locate(x[0], i, w);
    const double a = slice[i];
    out[0] = (w == 0.0 || n == 1) ? a : (1.0 - w) * a + w * slice[i + 1];
    return out;
  }
  int i = 0, j = 0;
  double wx = 0.0, wy = 0.0;
  locate(x[0], i, wx);
  locate(x[1], j, wy);
  const int i1 = std::min(i + 1, n - 1);
  const int j1 = std::min(j + 1, n - 1);
  for (int k = 0; k < 2; ++k) {
    const double v00 = slice[(static_cast<std::size_t>(i) * n + j) * 2 + k];
    const double v01 = slice[(static_cast<std::size_t>(i) * n + j1) * 2 + k];
    const double v10 = slice[(static_cast<std::size_t>(i1) * n + j) * 2 + k];
    const double v11 = slice[(static_cast<std::size_t>(i1) * n + j1) * 2 + k];
    out[k] = (1.0 - wx) * ((1.0 - wy) * v00 + wy * v01) + wx * ((1.0 - wy) * v10 + wy * v11);
  }
  return out;
}

double empirical_bound(const Kernel& kernel, std::size_t n, bool self_interaction) {
  if (self_interaction) return kernel.bound();
  const double ratio = static_cast<double>(n) / static_cast<double>(n - 1);
  return (kernel.vanishes_on_diagonal() ? 1.0 : 2.0) * kernel.bound() * ratio;
}

}  // namespace

DriftField DriftField::closed_form(Function f, int dim, double horizon, double sup_bound, std::string label) {
  if (dim < 1 || dim > kMaxDim) throw InvalidArgument("drift dimension must be 1 or 2");
  if (!f) throw InvalidArgument("closed-form drift needs a function");
  DriftField b;
  b.backing_ = DriftBacking::closed_form;
  b.dim_ = dim;
  b.horizon_ = horizon;
  b.sup_bound_ = sup_bound;
  b.function_ = std::move(f);
  b.label_ = std::move(label);
  return b;
}

DriftField DriftField::zero(int dim, double horizon) {
  return closed_form([](double, const Vec&) { return Vec{0.0, 0.0}; }, dim, horizon, 0.0, "zero");
}

DriftField DriftField::constant(Vec value, int dim, double horizon) {
  if (dim == 1) value[1] = 0.0;
  std::ostringstream s;
  s.precision(17);
  s << "constant(" << value[0] << "," << value[1] << ")";
  return closed_form([value](double, const Vec&) { return value; }, dim, horizon, norm(value, dim), s.str());
}

DriftField DriftField::empirical(Kernel kernel, std::shared_ptr<const SnapshotSeries> snapshots,
                                 bool self_interaction) {
  if (!snapshots || snapshots->positions.empty()) throw InvalidArgument("empirical drift: no snapshots");
  if (snapshots->dim != kernel.dim()) throw InvalidArgument("empirical drift: kernel and snapshot dimensions differ");
  const std::size_t n = snapshots->positions.front().size() / static_cast<std::size_t>(kernel.dim());
  if (n == 0) throw InvalidArgument("empirical drift: empty snapshot");
  if (!self_interaction && n < 2) throw InvalidArgument("empirical drift: N >= 2 needed without self-interaction");
  for (const auto& snap : snapshots->positions) {
    if (snap.size() != n * static_cast<std::size_t>(kernel.dim())) {
      throw InvalidArgument("empirical drift: snapshots differ in particle count");
    }
  }
  DriftField b;
  b.backing_ = DriftBacking::empirical;
  b.dim_ = kernel.dim();
  b.horizon_ = snapshots->dt * static_cast<double>(snapshots->positions.size() - 1);
  b.sup_bound_ = empirical_bound(kernel, n, self_interaction);
  b.kernel_ = std::make_shared<const Kernel>(std::move(kernel));
  b.snapshots_ = std::move(snapshots);
  b.self_interaction_ = self_interaction;
  return b;
}

DriftField DriftField::grid(std::shared_ptr<const GridSamples> samples, double horizon, double sup_bound) {
  if (!samples || samples->slices.empty()) throw InvalidArgument("grid drift: no samples");
  std::size_t nodes = 1;
  for (int k = 0; k < samples->dim; ++k) nodes *= static_cast<std::size_t>(samples->nodes_per_axis);
  for (const auto& s : samples->slices) {
    if (s.size() != nodes * static_cast<std::size_t>(samples->dim)) {
      throw InvalidArgument("grid drift: slice size does not match the grid");
    }
  }
  DriftField b;
  b.backing_ = DriftBacking::grid;
  b.dim_ = samples->dim;
  b.horizon_ = horizon;
  b.sup_bound_ = sup_bound;
  b.grid_ = std::move(samples);
  return b;
}

DriftField DriftField::net_element(std::vector<FourierMode> modes, double horizon) {
  DriftField b;
  b.backing_ = DriftBacking::net_element;
  b.dim_ = 1;
  b.horizon_ = horizon;
  double s = 0.0;
  for (const auto& m : modes) s += std::abs(m.coefficient);
  b.sup_bound_ = s;
  b.modes_ = std::move(modes);
  return b;
}

bool DriftField::time_independent() const noexcept {
  switch (backing_) {
    case DriftBacking::empirical:
      return snapshots_->positions.size() == 1;
    case DriftBacking::grid:
      return grid_->slices.size() == 1;
    case DriftBacking::net_element:
      return true;
    case DriftBacking::closed_form:
      break;
  }
  return false;
}

std::size_t DriftField::slice_index(double t, std::size_t count, double dt) const {
  if (!(t >= -1e-12) || !(t <= horizon_ * (1.0 + 1e-12) + 1e-12)) {
    throw InvalidArgument("drift evaluated outside its time domain");
  }
  if (count <= 1) return 0;
  const double k = std::floor(t / dt + 1e-9);
  if (k <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(k), count - 1);
}

Vec DriftField::operator()(double t, const Vec& x) const {
  switch (backing_) {
    case DriftBacking::closed_form:
      if (!(t >= -1e-12) || !(t <= horizon_ * (1.0 + 1e-12) + 1e-12)) {
        throw InvalidArgument("drift evaluated outside its time domain");
      }
      return function_(t, x);
    case DriftBacking::net_element: {
      double v = 0.0;
      for (const auto& m : modes_) v += m.coefficient * std::sin(m.frequency * x[0] + m.phase);
      return {v, 0.0};
    }
    case DriftBacking::grid: {
      const std::size_t k = slice_index(t, grid_->slices.size(), grid_->dt);
      return interpolate(*grid_, grid_->slices[k], x);
    }
    case DriftBacking::empirical:
      break;
  }
  std::array<double, kMaxDim> q{x[0], x[1]};
  std::array<double, kMaxDim> out{};
  eval_batch(t, std::span<const double>(q.data(), static_cast<std::size_t>(dim_)),
             std::span<double>(out.data(), static_cast<std::size_t>(dim_)));
  return {out[0], out[1]};
}

void DriftField::eval_batch(double t, std::span<const double> points, std::span<double> out) const {
  const auto d = static_cast<std::size_t>(dim_);
  if (points.size() % d != 0 || out.size() != points.size()) {
    throw InvalidArgument("eval_batch: buffer shape mismatch");
  }
  const std::size_t count = points.size() / d;
  if (backing_ != DriftBacking::empirical) {
    for (std::size_t i = 0; i < count; ++i) {
      const Vec v = (*this)(t, point_at(points, i, dim_));
      for (std::size_t k = 0; k < d; ++k) out[i * d + k] = v[k];
    }
    return;
  }
  const auto& snaps = snapshots_->positions;
  const auto& snap = snaps[slice_index(t, snaps.size(), snapshots_->dt)];
  if (points.size() == snap.size() && std::equal(points.begin(), points.end(), snap.begin())) {
    interaction_drift(*kernel_, snap, self_interaction_, out);
    return;
  }
  const std::size_t n = snap.size() / d;
  kernel_->sum_over_sources(points, snap, out);
  if (self_interaction_) {
    const double inv = 1.0 / static_cast<double>(n);
    for (double& v : out) v *= inv;
    return;
  }
  const double inv = 1.0 / static_cast<double>(n - 1);
  const bool diag_zero = kernel_->vanishes_on_diagonal();
  for (std::size_t i = 0; i < count; ++i) {
    Vec diag{0.0, 0.0};
    if (!diag_zero) {
      const Vec x = point_at(points, i, dim_);
      diag = (*kernel_)(x, x);
    }
    for (std::size_t k = 0; k < d; ++k) {
      out[i * d + k] = (out[i * d + k] - static_cast<double>(n) * diag[k]) * inv;
    }
  }
}

std::string DriftField::describe() const {
  std::ostringstream s;
  s.precision(17);
  switch (backing_) {
    case DriftBacking::closed_form:
      s << "closed_form:" << label_;
      break;
    case DriftBacking::empirical:
      s << "empirical:" << kernel_->describe() << (self_interaction_ ? "" : ",no_self")
        << ",snapshots=" << snapshots_->positions.size();
      break;
    case DriftBacking::grid:
      s << "grid:G=" << grid_->nodes_per_axis << ",L=" << grid_->half_width << ",slices=" << grid_->slices.size();
      break;
    case DriftBacking::net_element:
      s << "net_element:";
      for (const auto& m : modes_) s << "[" << m.coefficient << "," << m.frequency << "," << m.phase << "]";
      break;
  }
  return s.str();
}

void interaction_drift(const Kernel& kernel, std::span<const double> positions, bool self_interaction,
                       std::span<double> out) {
  const auto d = static_cast<std::size_t>(kernel.dim());
  const std::size_t n = positions.size() / d;
  if (n == 0) throw InvalidArgument("interaction drift: empty snapshot");
  kernel.sum_over_self(positions, out);
  if (self_interaction) {
    const double inv = 1.0 / static_cast<double>(n);
    for (double& v : out) v *= inv;
    return;
  }
  if (n < 2) throw InvalidArgument("interaction drift: N >= 2 needed without self-interaction");
  const double inv = 1.0 / static_cast<double>(n - 1);
  const bool diag_zero = kernel.vanishes_on_diagonal();
  for (std::size_t i = 0; i < n; ++i) {
    Vec diag{0.0, 0.0};
    if (!diag_zero) {
      const Vec x = point_at(positions, i, kernel.dim());
      diag = kernel(x, x);
    }
    for (std::size_t k = 0; k < d; ++k) {
      out[i * d + k] = (out[i * d + k] - static_cast<double>(n) * diag[k]) * inv;
    }
  }
}

DriftField empirical_drift(const Kernel& kernel, std::span<const double> snapshot, bool self_interaction,
                           double horizon) {
  auto series = std::make_shared<SnapshotSeries>();
  series->dim = kernel.dim();
  series->dt = horizon > 0.0 ? horizon : 1.0;
  series->positions.emplace_back(snapshot.begin(), snapshot.end());
  // a single snapshot spans [0, dt]; duplicate it so the horizon is honoured
  series->positions.push_back(series->positions.front());
  return DriftField::empirical(kernel, std::move(series), self_interaction);
}

std::vector<double> mean_field_values(const Kernel& kernel, const GridDensity& density) {
  if (kernel.dim() != density.dim) throw InvalidArgument("mean_field_drift: kernel and grid dimensions differ");
  const double total = density.total_mass();
  if (std::abs(total - 1.0) > 1e-6) {
    throw PreconditionViolation("mean_field_drift: density mass " + std::to_string(total) + " is not 1");
  }
  const int g = density.cells_per_axis;
  const double h = density.cell_width();
  const std::size_t cells = density.cell_count();
  const auto d = static_cast<std::size_t>(density.dim);
  std::vector<double> out(cells * d, 0.0);

  if (kernel.translation_invariant()) {
    if (density.dim == 1) {
      std::vector<double> table(2 * static_cast<std::size_t>(g) - 1);
      for (int o = -(g - 1); o <= g - 1; ++o) table[o + g - 1] = kernel({o * h, 0.0}, {0.0, 0.0})[0];
      for (int i = 0; i < g; ++i) {
        double s = 0.0;
        const double* row = table.data() + i + g - 1;
        for (int j = 0; j < g; ++j) s += density.mass[j] * row[-j];
        out[i] = s;
      }
      return out;
    }
    const int w = 2 * g - 1;
    std::vector<Vec> table(static_cast<std::size_t>(w) * w);
    for (int a = 0; a < w; ++a) {
      for (int b = 0; b < w; ++b) table[a * w + b] = kernel({(a - g + 1) * h, (b - g + 1) * h}, {0.0, 0.0});
    }
    for (int i0 = 0; i0 < g; ++i0) {
      for (int i1 = 0; i1 < g; ++i1) {
        double s0 = 0.0, s1 = 0.0;
        for (int j0 = 0; j0 < g; ++j0) {
          const Vec* row = table.data() + static_cast<std::size_t>(i0 - j0 + g - 1) * w + (i1 + g - 1);
          const double* m = density.mass.data() + static_cast<std::size_t>(j0) * g;
          for (int j1 = 0; j1 < g; ++j1) {
            s0 += m[j1] * row[-j1][0];
            s1 += m[j1] * row[-j1][1];
          }
        }
        const std::size_t c = static_cast<std::size_t>(i0) * g + i1;
        out[c * 2] = s0;
        out[c * 2 + 1] = s1;
      }
    }
    return out;
  }
  for (std::size_t i = 0; i < cells; ++i) {
    const Vec x = density.cell_center(i);
    Vec acc{0.0, 0.0};
    for (std::size_t j = 0; j < cells; ++j) {
      if (density.mass[j] == 0.0) continue;
      const Vec v = kernel(x, density.cell_center(j));
      acc[0] += density.mass[j] * v[0];
      acc[1] += density.mass[j] * v[1];
    }
    for (std::size_t k = 0; k < d; ++k) out[i * d + k] = acc[k];
  }
  return out;
}

DriftField mean_field_drift(const Kernel& kernel, const GridDensity& density, double horizon) {
  auto samples = std::make_shared<GridSamples>();
  samples->dim = density.dim;
  samples->half_width = density.half_width;
  samples->nodes_per_axis = density.cells_per_axis;
  samples->dt = std::numeric_limits<double>::infinity();
  samples->slices.push_back(mean_field_values(kernel, density));
  return DriftField::grid(std::move(samples), horizon, kernel.bound());
}

double estimate_holder_norm(const DriftField& field, const HolderProbe& probe) {
  if (probe.times.empty()) throw InvalidArgument("estimate_holder_norm: need at least one time slice");
  if (!(probe.alpha > 0.0 && probe.alpha <= 1.0)) throw InvalidArgument("estimate_holder_norm: alpha in (0,1]");
  if (!(probe.min_separation > 0.0) || probe.max_separation < probe.min_separation) {
    throw InvalidArgument("estimate_holder_norm: bad separation range");
  }
  const int dim = field.dim();
  const auto d = static_cast<std::size_t>(dim);

  std::vector<Vec> xs, ys;
  auto add_pair = [&](Vec a, Vec b) {
    xs.push_back(a);
    ys.push_back(b);
  };
  const Vec a0 = probe.anchor;
  for (int k = 0; k <= 12; ++k) {
    const double delta = std::ldexp(1.0, -k);
    if (delta < probe.min_separation || delta > probe.max_separation) continue;
    for (int axis = 0; axis < dim; ++axis) {
      Vec e{0.0, 0.0};
      e[axis] = delta;
      add_pair(a0, {a0[0] + e[0], a0[1] + e[1]});
      add_pair({a0[0] - e[0], a0[1] - e[1]}, a0);
      add_pair({a0[0] - 0.5 * e[0], a0[1] - 0.5 * e[1]}, {a0[0] + 0.5 * e[0], a0[1] + 0.5 * e[1]});
    }
  }
  rng::Stream stream(probe.seed, 0x4f4c44);
  const double log_lo = std::log(probe.min_separation);
  const double log_hi = std::log(probe.max_separation);
  for (std::size_t p = 0; p < probe.pair_count; ++p) {
    Vec c{0.0, 0.0};
    for (int k = 0; k < dim; ++k) c[k] = a0[k] + stream.uniform(-probe.spread, probe.spread);
    const double sep = std::exp(stream.uniform(log_lo, log_hi));
    Vec u{1.0, 0.0};
    if (dim == 2) {
      const double th = stream.uniform(0.0, 2.0 * std::numbers::pi);
      u = {std::cos(th), std::sin(th)};
    } else if (stream.uniform() < 0.5) {
      u[0] = -1.0;
    }
    add_pair({c[0] - 0.5 * sep * u[0], c[1] - 0.5 * sep * u[1]}, {c[0] + 0.5 * sep * u[0], c[1] + 0.5 * sep * u[1]});
  }

  const std::size_t np = xs.size();
  std::vector<double> points(2 * np * d);
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      points[i * d + k] = xs[i][k];
      points[(np + i) * d + k] = ys[i][k];
    }
  }

  std::vector<double> times = probe.times;
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  double sup = 0.0;
  double quotient = 0.0;
  std::vector<double> prev;
  std::vector<double> vals(points.size());
  double prev_t = 0.0;
  for (std::size_t s = 0; s < times.size(); ++s) {
    field.eval_batch(times[s], points, vals);
    for (std::size_t i = 0; i < 2 * np; ++i) {
      sup = std::max(sup, norm(point_at(vals, i, dim), dim));
    }
    for (std::size_t i = 0; i < np; ++i) {
      const double num = distance(point_at(vals, i, dim), point_at(vals, np + i, dim), dim);
      const double den = std::pow(distance(xs[i], ys[i], dim), probe.alpha);
      if (den > 0.0) quotient = std::max(quotient, num / den);
    }
    if (s > 0) {
      const double den = std::pow(times[s] - prev_t, 0.5 * probe.alpha);
      for (std::size_t i = 0; i < 2 * np; ++i) {
        quotient = std::max(quotient, distance(point_at(vals, i, dim), point_at(prev, i, dim), dim) / den);
      }
    }
    prev = vals;
    prev_t = times[s];
  }
  return sup + quotient;
}

double fourier_holder_bound(const std::vector<FourierMode>& modes, double alpha) {
  const double c = std::pow(2.0, 1.0 - alpha);
  double s = 0.0;
  for (const auto& m : modes) s += std::abs(m.coefficient) * (1.0 + c * std::pow(std::abs(m.frequency), alpha));
  return s;
}

std::vector<DriftField> holder_net(const HolderBallSpec& spec, std::size_t count, double horizon) {
  if (!(spec.radius > 0.0)) throw InvalidArgument("holder_net: ball radius C must be positive");
  if (!(spec.alpha > 0.0 && spec.alpha <= 1.0)) throw InvalidArgument("holder_net: alpha must lie in (0,1]");
  if (spec.mode_count < 1 || 3 * static_cast<std::size_t>(spec.mode_count) > kPrimes.size()) {
    throw InvalidArgument("holder_net: mode_count must lie in [1, 12]");
  }
  if (!(spec.frequency_cap >= 1.0)) throw InvalidArgument("holder_net: frequency_cap must be >= 1");
  if (count < 1) throw InvalidArgument("holder_net: count must be >= 1");

  std::vector<DriftField> net;
  net.reserve(count);
  net.push_back(DriftField::net_element({}, horizon));
  for (std::size_t m = 1; m < count; ++m) {
    const std::uint64_t n = m + spec.enumeration_offset;
    std::vector<FourierMode> modes(static_cast<std::size_t>(spec.mode_count));
    for (int j = 0; j < spec.mode_count; ++j) {
      const double u = rng::radical_inverse(n, kPrimes[3 * j]);
      const double sign = u < 0.5 ? -1.0 : 1.0;
      modes[j].coefficient = sign * (0.25 + 0.75 * std::abs(2.0 * u - 1.0));
      modes[j].frequency = 1.0 + (spec.frequency_cap - 1.0) * rng::radical_inverse(n, kPrimes[3 * j + 1]);
      modes[j].phase = j == 0 ? 0.0 : 2.0 * std::numbers::pi * rng::radical_inverse(n, kPrimes[3 * j + 2]);
    }
    const double scale = spec.radius * (1.0 - 1e-12) / fourier_holder_bound(modes, spec.alpha);
    for (auto& mode : modes) mode.coefficient *= scale;
    net.push_back(DriftField::net_element(std::move(modes), horizon));
  }
  return net;
}

}  // namespace chaoslab::field
