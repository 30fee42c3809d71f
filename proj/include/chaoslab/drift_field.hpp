#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "chaoslab/geometry.hpp"
#include "chaoslab/grid.hpp"
#include "chaoslab/kernel.hpp"

namespace chaoslab::field {

enum class DriftBacking { closed_form, empirical, grid, net_element };

/// One term c sin(omega x + phase) of a Fourier-feature field on R.
struct FourierMode {
  double coefficient = 0.0;
  double frequency = 0.0;
  double phase = 0.0;
};

/// Drift samples at the cell centers of a grid, one slice per time step.
/// Slice k is used on [k dt, (k+1) dt); the last slice extends to the horizon.
struct GridSamples {
  int dim = 1;
  double half_width = 1.0;
  int nodes_per_axis = 1;
  double dt = 1.0;
  std::vector<std::vector<double>> slices;  // node-major, stride dim
};

/// Particle positions per time step, flat with stride dim; snapshot k lives at t = k dt.
struct SnapshotSeries {
  int dim = 1;
  double dt = 1.0;
  std::vector<std::vector<double>> positions;
};

/**
 * Time-dependent vector field b_t(x) on [0, T] x R^d. Cheap to copy; the
 * backing data is shared and never mutated.
 */
class DriftField {
 public:
  using Function = std::function<Vec(double, const Vec&)>;

  static DriftField closed_form(Function f, int dim, double horizon, double sup_bound, std::string label);
  static DriftField zero(int dim = 1, double horizon = 1.0);
  static DriftField constant(Vec value, int dim = 1, double horizon = 1.0);
  static DriftField empirical(Kernel kernel, std::shared_ptr<const SnapshotSeries> snapshots, bool self_interaction);
  static DriftField grid(std::shared_ptr<const GridSamples> samples, double horizon, double sup_bound);
  static DriftField net_element(std::vector<FourierMode> modes, double horizon = 1.0);

  Vec operator()(double t, const Vec& x) const;
  /// Evaluate at many points (flat, stride dim). Querying an empirical field at exactly
  /// its own snapshot takes the same arithmetic path as the interacting simulation.
  void eval_batch(double t, std::span<const double> points, std::span<double> out) const;

  int dim() const noexcept { return dim_; }
  double horizon() const noexcept { return horizon_; }
  DriftBacking backing() const noexcept { return backing_; }
  double sup_bound() const noexcept { return sup_bound_; }
  bool time_independent() const noexcept;
  const std::vector<FourierMode>& modes() const noexcept { return modes_; }
  std::string describe() const;

 private:
  DriftField() = default;
  std::size_t slice_index(double t, std::size_t count, double dt) const;

  DriftBacking backing_ = DriftBacking::closed_form;
  int dim_ = 1;
  double horizon_ = 1.0;
  double sup_bound_ = 0.0;
  std::string label_;
  Function function_;
  std::shared_ptr<const Kernel> kernel_;
  std::shared_ptr<const SnapshotSeries> snapshots_;
  bool self_interaction_ = true;
  std::shared_ptr<const GridSamples> grid_;
  std::vector<FourierMode> modes_;
};

/// out_i = b^N(X_i) for the snapshot itself: (1/N) sum_j K(X_i, X_j), or with
/// self_interaction = false the K~(x,y) = K(x,y) - K(x,x) average over N - 1.
void interaction_drift(const Kernel& kernel, std::span<const double> positions, bool self_interaction,
                       std::span<double> out);

/// Empirical field of a single snapshot, constant in time on [0, horizon].
DriftField empirical_drift(const Kernel& kernel, std::span<const double> snapshot, bool self_interaction,
                           double horizon = 1.0);

/// b(x) = sum_cells mass K(x, center) sampled at the cell centers, linearly interpolated.
std::vector<double> mean_field_values(const Kernel& kernel, const GridDensity& density);
DriftField mean_field_drift(const Kernel& kernel, const GridDensity& density, double horizon = 1.0);

struct HolderProbe {
  double alpha = 1.0;
  std::size_t pair_count = 256;  // random pairs per time slice, on top of the dyadic ladder
  double min_separation = 1.0 / 4096.0;
  double max_separation = 1.0;
  std::vector<double> times{0.0};
  Vec anchor{0.0, 0.0};
  double spread = 2.0;  // random pair centers drawn from [-spread, spread]^d around the anchor
  std::uint64_t seed = 0;
};

/// Sampled lower bound on the parabolic Hoelder norm: sup |b| plus the largest
/// quotient |b_t(x) - b_s(y)| / (|x - y|^a + |t - s|^(a/2)) over the probes.
double estimate_holder_norm(const DriftField& field, const HolderProbe& probe);

struct HolderBallSpec {
  double alpha = 1.0;
  double radius = 1.0;  // C
  int mode_count = 2;
  double frequency_cap = 8.0;
  std::uint64_t enumeration_offset = 0;  // shifts the Halton index of element m >= 1
};

/// Analytic bound sum_j |c_j| (1 + 2^(1-a) |w_j|^a) on the Hoelder norm of a net element.
double fourier_holder_bound(const std::vector<FourierMode>& modes, double alpha);

/// Deterministic finite subset of the Hoelder ball; element 0 is the zero field.
std::vector<DriftField> holder_net(const HolderBallSpec& spec, std::size_t count, double horizon = 1.0);

}  // namespace chaoslab::field
