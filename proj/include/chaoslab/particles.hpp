#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "chaoslab/drift_field.hpp"
#include "chaoslab/grid.hpp"
#include "chaoslab/kernel.hpp"

namespace chaoslab::particles {

enum class Order { first, second };

enum class F0Family { gaussian, uniform_box, bump };

/// Initial law, a product of identical one-dimensional factors centred at `mean`.
/// gaussian: N(mean, scale^2); uniform_box: U[mean - scale, mean + scale];
/// bump: density proportional to exp(-1 / (1 - ((x - mean)/scale)^2)) on |x - mean| < scale.
struct F0Spec {
  F0Family family = F0Family::gaussian;
  double mean = 0.0;
  double scale = 1.0;
  double moment_order = 4.0;  // p used by the rate formulas; every family has all moments

  void validate() const;
  /// Exact cell masses on the grid, renormalised; `tail` receives the mass outside the box.
  GridDensity density_on_grid(int dim, double half_width, int cells_per_axis, double* tail = nullptr) const;
  /// Mass of one coordinate factor outside [-half_width, half_width].
  double tail_mass_1d(double half_width) const;
  double variance() const;
  std::string describe() const;
};

struct SimConfig {
  Order order = Order::first;
  std::size_t n = 128;
  int dim = 1;
  double horizon = 1.0;
  double dt = 1.0 / 512.0;
  double kappa = 0.0;
  F0Spec initial{};
  F0Spec velocity{};  // second order only
  std::uint64_t seed = 0;
  bool self_interaction = true;
  double divergence_radius = 1e6;

  /// Validates and returns T / dt as a whole number.
  std::size_t steps() const;
};

/// Brownian increments per (step, particle), N(0, dt I), drawn from a counter-based stream.
class NoiseStore {
 public:
  NoiseStore(std::uint64_t seed, std::size_t n, int dim, std::size_t steps, double dt);

  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t particles() const noexcept { return n_; }
  int dim() const noexcept { return dim_; }
  std::size_t steps() const noexcept { return steps_; }
  double dt() const noexcept { return dt_; }
  /// Increments of step k, flat with stride dim.
  std::span<const double> step(std::size_t k) const;
  const std::vector<double>& data() const noexcept { return increments_; }

 private:
  std::uint64_t seed_;
  std::size_t n_;
  int dim_;
  std::size_t steps_;
  double dt_;
  std::vector<double> increments_;
};

/// Noise store matching a configuration; seed derived from config.seed.
NoiseStore make_noise(const SimConfig& config);

struct InitialState {
  std::vector<double> positions;
  std::vector<double> velocities;  // empty for first order
};

/// N i.i.d. draws from f0, deterministic in (seed, stream).
std::vector<double> sample_initial(const F0Spec& f0, std::size_t n, int dim, std::uint64_t seed,
                                   std::uint64_t stream = 1);
InitialState initial_state(const SimConfig& config);

struct Provenance {
  std::string config_digest;
  std::string drift;
  std::uint64_t noise_seed = 0;
};

struct TrajectoryBundle {
  Order order = Order::first;
  int dim = 1;
  std::size_t n = 0;
  std::vector<double> times;
  std::vector<std::vector<double>> positions;   // per step, flat stride dim
  std::vector<std::vector<double>> velocities;  // per step, second order only
  Provenance provenance;

  std::size_t steps() const noexcept { return times.empty() ? 0 : times.size() - 1; }
};

/// Canonical JSON of a SimConfig and its SHA-256.
std::string config_json(const SimConfig& config);
std::string config_digest(const SimConfig& config);

TrajectoryBundle simulate_interacting(const SimConfig& config, const field::Kernel& kernel, const NoiseStore& noise);
TrajectoryBundle simulate_frozen(const SimConfig& config, const field::DriftField& drift, const NoiseStore& noise);
/// Variant starting from explicit initial states instead of sampling them.
TrajectoryBundle simulate_frozen(const SimConfig& config, const field::DriftField& drift, const NoiseStore& noise,
                                 const InitialState& init);
TrajectoryBundle reference_trajectories(const SimConfig& config, const InitialState& init);

/// Snapshots of a bundle as a shared series for empirical drift fields.
std::shared_ptr<const field::SnapshotSeries> snapshot_series(const TrajectoryBundle& bundle);

struct IncrementStats {
  std::vector<double> sup_norm;                 // per particle sup_t |Z_t|
  std::vector<double> epsilons;                 // requested window levels
  std::vector<std::vector<double>> modulus;     // [eps][particle]
};

/// Z = bundle - reference (positions, plus velocities in second order, Euclidean in R^{2d}).
/// The modulus at level eps is max |Z_s - Z_t0| over |s - t0|^theta <= eps, anchored at
/// t0 = anchor_time.
IncrementStats compensated_increment_stats(const TrajectoryBundle& bundle, const TrajectoryBundle& reference,
                                           const std::vector<double>& epsilons, double window_exponent = 1.0 / 3.0,
                                           double anchor_time = 0.0);

/// CSV dump (particle, step, t, x1..xd[, v1..vd]) and a JSON provenance sidecar at path + ".json".
void write_bundle(const TrajectoryBundle& bundle, const std::string& path);

}  // namespace chaoslab::particles
