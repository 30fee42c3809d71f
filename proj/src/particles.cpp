#include "chaoslab/particles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "chaoslab/digest.hpp"
#include "chaoslab/errors.hpp"
#include "chaoslab/rng.hpp"

namespace chaoslab::particles {

namespace {

constexpr std::uint64_t kNoiseStream = 0x4E4F495345ULL;
constexpr std::uint64_t kVelocityStream = 2;

// 5-point Gauss-Legendre nodes and weights on [-1, 1]
constexpr double kGlNodes[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                0.9061798459386640};
constexpr double kGlWeights[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                                  0.2369268850561891};

double bump_profile(double z) {
  if (std::abs(z) >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - z * z));
}

/// Integral of the unnormalised bump profile over [a, b] in standardised units.
double bump_integral(double a, double b, int pieces) {
  a = std::max(a, -1.0);
  b = std::min(b, 1.0);
  if (!(b > a)) return 0.0;
  const double h = (b - a) / pieces;
  double s = 0.0;
  for (int p = 0; p < pieces; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (int q = 0; q < 5; ++q) s += kGlWeights[q] * bump_profile(mid + 0.5 * h * kGlNodes[q]);
  }
  return 0.5 * h * s;
}

double bump_normaliser() {
  static const double z = bump_integral(-1.0, 1.0, 4096);
  return z;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Probability of [a, b] under one coordinate factor.
double factor_mass(const F0Spec& f, double a, double b) {
  switch (f.family) {
    case F0Family::gaussian:
      return normal_cdf((b - f.mean) / f.scale) - normal_cdf((a - f.mean) / f.scale);
    case F0Family::uniform_box: {
      const double lo = std::max(a, f.mean - f.scale);
      const double hi = std::min(b, f.mean + f.scale);
      return hi > lo ? (hi - lo) / (2.0 * f.scale) : 0.0;
    }
    case F0Family::bump:
      return bump_integral((a - f.mean) / f.scale, (b - f.mean) / f.scale, 16) / bump_normaliser();
  }
  return 0.0;
}

double sample_factor(const F0Spec& f, rng::Stream& stream) {
  switch (f.family) {
    case F0Family::gaussian:
      return f.mean + f.scale * stream.normal();
    case F0Family::uniform_box:
      return f.mean + f.scale * (2.0 * stream.uniform() - 1.0);
    case F0Family::bump:
      for (;;) {
        const double z = 2.0 * stream.uniform() - 1.0;
        if (stream.uniform() * std::exp(-1.0) <= bump_profile(z)) return f.mean + f.scale * z;
      }
  }
  return 0.0;
}

void check_state(std::span<const double> values, double radius, std::size_t step, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw SimulationDiverged(step, std::string("non-finite ") + what);
    if (std::abs(v) > radius) throw SimulationDiverged(step, std::string(what) + " left the divergence radius");
  }
}

using DriftEval = std::function<void(std::size_t step, double t, std::span<const double> x, std::span<double> out)>;

TrajectoryBundle integrate(const SimConfig& config, const NoiseStore& noise, const InitialState& init,
                           const DriftEval& drift, std::string drift_label) {
  const std::size_t steps = config.steps();
  const auto d = static_cast<std::size_t>(config.dim);
  const std::size_t width = config.n * d;
  if (noise.particles() != config.n || noise.dim() != config.dim || noise.steps() != steps ||
      noise.dt() != config.dt) {
    throw InvalidArgument("noise store shape does not match the configuration");
  }
  if (init.positions.size() != width) throw InvalidArgument("initial positions have the wrong shape");
  const bool second = config.order == Order::second;
  if (second && init.velocities.size() != width) throw InvalidArgument("initial velocities have the wrong shape");

  TrajectoryBundle out;
  out.order = config.order;
  out.dim = config.dim;
  out.n = config.n;
  out.times.resize(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) out.times[k] = static_cast<double>(k) * config.dt;
  out.positions.reserve(steps + 1);
  out.positions.push_back(init.positions);
  if (second) out.velocities.push_back(init.velocities);
  out.provenance = {config_digest(config), std::move(drift_label), noise.seed()};

  const double dt = config.dt;
  const double kdt = config.kappa * dt;
  const double decay = std::exp(-kdt);
  // phi1(z) = (1 - e^-z)/z and the OU variance ratio, both with their kappa -> 0 limits
  const double phi1 = kdt == 0.0 ? 1.0 : -std::expm1(-kdt) / kdt;
  const double noise_scale = kdt == 0.0 ? 1.0 : std::sqrt(-std::expm1(-2.0 * kdt) / (2.0 * kdt));

  std::vector<double> b(width);
  for (std::size_t k = 0; k < steps; ++k) {
    const auto& x = out.positions.back();
    drift(k, out.times[k], x, b);
    const auto db = noise.step(k);
    std::vector<double> xn(width);
    if (!second) {
      for (std::size_t i = 0; i < width; ++i) xn[i] = (x[i] + b[i] * dt) + db[i];
      check_state(xn, config.divergence_radius, k + 1, "position");
      out.positions.push_back(std::move(xn));
      continue;
    }
    const auto& v = out.velocities.back();
    std::vector<double> vn(width);
    for (std::size_t i = 0; i < width; ++i) {
      xn[i] = x[i] + v[i] * dt;
      vn[i] = (decay * v[i] + b[i] * phi1 * dt) + db[i] * noise_scale;
    }
    check_state(xn, config.divergence_radius, k + 1, "position");
    check_state(vn, config.divergence_radius, k + 1, "velocity");
    out.positions.push_back(std::move(xn));
    out.velocities.push_back(std::move(vn));
  }
  return out;
}

}  // namespace

void F0Spec::validate() const {
  if (!std::isfinite(mean)) throw InvalidArgument("initial law: mean must be finite");
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InvalidArgument("initial law: scale must be positive (degenerate point masses are not supported)");
  }
  if (!(moment_order > 1.0)) throw InvalidArgument("initial law: moment order p must exceed 1");
}

double F0Spec::variance() const {
  switch (family) {
    case F0Family::gaussian:
      return scale * scale;
    case F0Family::uniform_box:
      return scale * scale / 3.0;
    case F0Family::bump: {
      // second moment of the normalised profile by quadrature
      const int pieces = 4096;
      const double h = 2.0 / pieces;
      double s = 0.0;
      for (int p = 0; p < pieces; ++p) {
        const double mid = -1.0 + (p + 0.5) * h;
        for (int q = 0; q < 5; ++q) {
          const double z = mid + 0.5 * h * kGlNodes[q];
          s += kGlWeights[q] * z * z * bump_profile(z);
        }
      }
      return scale * scale * 0.5 * h * s / bump_normaliser();
    }
  }
  return 0.0;
}

double F0Spec::tail_mass_1d(double half_width) const {
  return std::max(0.0, 1.0 - factor_mass(*this, -half_width, half_width));
}

GridDensity F0Spec::density_on_grid(int dim, double half_width, int cells_per_axis, double* tail) const {
  validate();
  GridDensity g(dim, half_width, cells_per_axis);
  std::vector<double> m1(static_cast<std::size_t>(cells_per_axis));
  const double h = g.cell_width();
  double inside = 0.0;
  for (int i = 0; i < cells_per_axis; ++i) {
    const double a = -half_width + i * h;
    m1[i] = factor_mass(*this, a, a + h);
    inside += m1[i];
  }
  if (!(inside > 0.0)) throw DomainTooSmall("initial law has no mass on the grid");
  if (tail != nullptr) *tail = 1.0 - std::pow(std::min(inside, 1.0), dim);
  for (double& m : m1) m /= inside;
  if (dim == 1) {
    g.mass = m1;
  } else {
    for (int i = 0; i < cells_per_axis; ++i) {
      for (int j = 0; j < cells_per_axis; ++j) g.mass[static_cast<std::size_t>(i) * cells_per_axis + j] = m1[i] * m1[j];
    }
  }
  return g;
}

std::string F0Spec::describe() const {
  std::ostringstream s;
  s.precision(17);
  const char* name = family == F0Family::gaussian ? "gaussian" : family == F0Family::uniform_box ? "uniform_box" : "bump";
  s << name << "(mean=" << mean << ",scale=" << scale << ",p=" << moment_order << ")";
  return s.str();
}

std::size_t SimConfig::steps() const {
  if (n < 1) throw InvalidArgument("simulation needs N >= 1");
  if (dim < 1 || dim > kMaxDim) throw InvalidArgument("simulation dimension must be 1 or 2");
  if (!(dt > 0.0) || !(horizon >= 0.0)) throw InvalidArgument("simulation needs dt > 0 and T >= 0");
  if (!(kappa >= 0.0)) throw InvalidArgument("friction kappa must be non-negative");
  const double ratio = horizon / dt;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw InvalidArgument("T / dt must be a whole number of steps");
  }
  return static_cast<std::size_t>(rounded);
}

NoiseStore::NoiseStore(std::uint64_t seed, std::size_t n, int dim, std::size_t steps, double dt)
    : seed_(seed), n_(n), dim_(dim), steps_(steps), dt_(dt) {
  if (dim < 1 || dim > kMaxDim) throw InvalidArgument("noise dimension must be 1 or 2");
  if (!(dt > 0.0)) throw InvalidArgument("noise needs dt > 0");
  const std::size_t total = steps * n * static_cast<std::size_t>(dim);
  increments_.resize(total);
  const double s = std::sqrt(dt);
  for (std::size_t idx = 0; idx + 1 < total; idx += 2) {
    const auto [a, b] = rng::normal_pair(seed, kNoiseStream, idx / 2);
    increments_[idx] = s * a;
    increments_[idx + 1] = s * b;
  }
  if (total % 2 == 1) increments_[total - 1] = s * rng::normal_pair(seed, kNoiseStream, total / 2).first;
}

std::span<const double> NoiseStore::step(std::size_t k) const {
  if (k >= steps_) throw InvalidArgument("noise step out of range");
  const std::size_t w = n_ * static_cast<std::size_t>(dim_);
  return std::span<const double>(increments_).subspan(k * w, w);
}

NoiseStore make_noise(const SimConfig& config) {
  return NoiseStore(rng::derive_seed(config.seed, 3), config.n, config.dim, config.steps(), config.dt);
}

std::vector<double> sample_initial(const F0Spec& f0, std::size_t n, int dim, std::uint64_t seed,
                                   std::uint64_t stream) {
  f0.validate();
  if (n < 1) throw InvalidArgument("sample_initial: N >= 1 required");
  rng::Stream s(seed, stream);
  std::vector<double> out(n * static_cast<std::size_t>(dim));
  for (double& v : out) v = sample_factor(f0, s);
  return out;
}

InitialState initial_state(const SimConfig& config) {
  InitialState st;
  st.positions = sample_initial(config.initial, config.n, config.dim, config.seed, 1);
  if (config.order == Order::second) {
    st.velocities = sample_initial(config.velocity, config.n, config.dim, config.seed, kVelocityStream);
  }
  return st;
}

std::string config_json(const SimConfig& c) {
  auto law = [](const F0Spec& f) {
    return nlohmann::json{{"family", f.family == F0Family::gaussian      ? "gaussian"
                                     : f.family == F0Family::uniform_box ? "uniform_box"
                                                                         : "bump"},
                          {"mean", f.mean},
                          {"scale", f.scale},
                          {"moment_order", f.moment_order}};
  };
  nlohmann::json j{{"order", c.order == Order::first ? "first" : "second"},
                   {"N", c.n},
                   {"d", c.dim},
                   {"T", c.horizon},
                   {"dt", c.dt},
                   {"kappa", c.kappa},
                   {"initial", law(c.initial)},
                   {"seed", c.seed},
                   {"self_interaction", c.self_interaction},
                   {"divergence_radius", c.divergence_radius}};
  if (c.order == Order::second) j["velocity"] = law(c.velocity);
  return j.dump();
}

std::string config_digest(const SimConfig& config) { return sha256_hex(config_json(config)); }

TrajectoryBundle simulate_interacting(const SimConfig& config, const field::Kernel& kernel, const NoiseStore& noise) {
  if (kernel.dim() != config.dim) throw InvalidArgument("kernel dimension does not match the configuration");
  if (!config.self_interaction && config.n < 2) throw InvalidArgument("N >= 2 needed without self-interaction");
  const bool self = config.self_interaction;
  return integrate(
      config, noise, initial_state(config),
      [&](std::size_t, double, std::span<const double> x, std::span<double> out) {
        field::interaction_drift(kernel, x, self, out);
      },
      "interacting:" + kernel.describe());
}

TrajectoryBundle simulate_frozen(const SimConfig& config, const field::DriftField& drift, const NoiseStore& noise,
                                 const InitialState& init) {
  if (drift.dim() != config.dim) throw InvalidArgument("drift dimension does not match the configuration");
  return integrate(
      config, noise, init,
      [&](std::size_t, double t, std::span<const double> x, std::span<double> out) { drift.eval_batch(t, x, out); },
      "frozen:" + drift.describe());
}

TrajectoryBundle simulate_frozen(const SimConfig& config, const field::DriftField& drift, const NoiseStore& noise) {
  return simulate_frozen(config, drift, noise, initial_state(config));
}

TrajectoryBundle reference_trajectories(const SimConfig& config, const InitialState& init) {
  const std::size_t steps = config.steps();
  const std::size_t width = config.n * static_cast<std::size_t>(config.dim);
  if (init.positions.size() != width) throw InvalidArgument("initial positions have the wrong shape");
  const bool second = config.order == Order::second;
  if (second && init.velocities.size() != width) throw InvalidArgument("initial velocities have the wrong shape");
  TrajectoryBundle out;
  out.order = config.order;
  out.dim = config.dim;
  out.n = config.n;
  out.provenance = {config_digest(config), "reference", 0};
  out.times.resize(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * config.dt;
    out.times[k] = t;
    if (!second) {
      out.positions.push_back(init.positions);
      continue;
    }
    // X~ = X0 + V0 (1 - e^{-kt})/k, V~ = V0 e^{-kt}
    const double travel = config.kappa == 0.0 ? t : -std::expm1(-config.kappa * t) / config.kappa;
    const double decay = std::exp(-config.kappa * t);
    std::vector<double> x(width), v(width);
    for (std::size_t i = 0; i < width; ++i) {
      x[i] = init.positions[i] + init.velocities[i] * travel;
      v[i] = init.velocities[i] * decay;
    }
    out.positions.push_back(std::move(x));
    out.velocities.push_back(std::move(v));
  }
  return out;
}

std::shared_ptr<const field::SnapshotSeries> snapshot_series(const TrajectoryBundle& bundle) {
  auto s = std::make_shared<field::SnapshotSeries>();
  s->dim = bundle.dim;
  s->dt = bundle.times.size() > 1 ? bundle.times[1] - bundle.times[0] : 1.0;
  s->positions = bundle.positions;
  return s;
}

IncrementStats compensated_increment_stats(const TrajectoryBundle& bundle, const TrajectoryBundle& reference,
                                           const std::vector<double>& epsilons, double window_exponent,
                                           double anchor_time) {
  if (bundle.times != reference.times || bundle.n != reference.n || bundle.dim != reference.dim ||
      bundle.order != reference.order) {
    throw InvalidArgument("compensated_increment_stats: bundles differ in shape");
  }
  if (!(window_exponent > 0.0)) throw InvalidArgument("window exponent must be positive");
  const std::size_t steps = bundle.times.size();
  const std::size_t n = bundle.n;
  const auto d = static_cast<std::size_t>(bundle.dim);
  const bool second = bundle.order == Order::second;

  // Z_t per particle as a vector in R^d (or R^{2d})
  auto z_at = [&](std::size_t k, std::size_t i, std::size_t c) {
    if (c < d) return bundle.positions[k][i * d + c] - reference.positions[k][i * d + c];
    return bundle.velocities[k][i * d + c - d] - reference.velocities[k][i * d + c - d];
  };
  const std::size_t comps = second ? 2 * d : d;
  auto dist = [&](std::size_t k1, std::size_t k2, std::size_t i) {
    double s = 0.0;
    for (std::size_t c = 0; c < comps; ++c) {
      const double a = z_at(k1, i, c) - z_at(k2, i, c);
      s += a * a;
    }
    return std::sqrt(s);
  };

  IncrementStats out;
  out.sup_norm.assign(n, 0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t c = 0; c < comps; ++c) s += z_at(k, i, c) * z_at(k, i, c);
      out.sup_norm[i] = std::max(out.sup_norm[i], std::sqrt(s));
    }
  }
  const auto anchor_it = std::lower_bound(bundle.times.begin(), bundle.times.end(), anchor_time - 1e-12);
  if (anchor_it == bundle.times.end()) throw InvalidArgument("anchor time outside the bundle");
  const auto anchor = static_cast<std::size_t>(anchor_it - bundle.times.begin());
  out.epsilons = epsilons;
  for (double eps : epsilons) {
    if (!(eps > 0.0)) throw InvalidArgument("window level eps must be positive");
    const double window = std::pow(eps, 1.0 / window_exponent);
    std::vector<double> mod(n, 0.0);
    for (std::size_t k = 0; k < steps; ++k) {
      if (std::abs(bundle.times[k] - bundle.times[anchor]) > window * (1.0 + 1e-12)) continue;
      for (std::size_t i = 0; i < n; ++i) mod[i] = std::max(mod[i], dist(k, anchor, i));
    }
    out.modulus.push_back(std::move(mod));
  }
  return out;
}

void write_bundle(const TrajectoryBundle& bundle, const std::string& path) {
  std::ofstream csv(path);
  if (!csv) throw InvalidArgument("cannot write " + path);
  csv << std::setprecision(17);
  csv << "particle,step,t";
  for (int k = 1; k <= bundle.dim; ++k) csv << ",x" << k;
  if (bundle.order == Order::second) {
    for (int k = 1; k <= bundle.dim; ++k) csv << ",v" << k;
  }
  csv << "\n";
  const auto d = static_cast<std::size_t>(bundle.dim);
  for (std::size_t i = 0; i < bundle.n; ++i) {
    for (std::size_t k = 0; k < bundle.times.size(); ++k) {
      csv << i << "," << k << "," << bundle.times[k];
      for (std::size_t c = 0; c < d; ++c) csv << "," << bundle.positions[k][i * d + c];
      if (bundle.order == Order::second) {
        for (std::size_t c = 0; c < d; ++c) csv << "," << bundle.velocities[k][i * d + c];
      }
      csv << "\n";
    }
  }
  std::ofstream side(path + ".json");
  if (!side) throw InvalidArgument("cannot write " + path + ".json");
  side << nlohmann::json{{"config_sha256", bundle.provenance.config_digest},
                         {"drift", bundle.provenance.drift},
                         {"noise_seed", bundle.provenance.noise_seed},
                         {"particles", bundle.n},
                         {"steps", bundle.steps()}}
              .dump(2)
       << "\n";
}

}  // namespace chaoslab::particles
