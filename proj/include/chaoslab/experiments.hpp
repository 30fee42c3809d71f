#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chaoslab/covering.hpp"
#include "chaoslab/drift_field.hpp"
#include "chaoslab/kernel.hpp"
#include "chaoslab/particles.hpp"
#include "chaoslab/pde.hpp"

namespace chaoslab::experiments {

/// Runs task(i) for i in [0, count) on up to `jobs` threads. Results must be written
/// into per-index slots, so the outcome does not depend on scheduling.
void run_tasks(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& task);

/// Seed of sub-run (n, replicate) under a master seed.
std::uint64_t subrun_seed(std::uint64_t master, std::size_t n, std::size_t replicate);

struct GridSpec {
  double half_width = 8.0;
  int cells = 512;
};

struct PhaseGridSpec {
  double half_width_x = 8.0;
  double half_width_v = 6.0;
  int cells_x = 128;
  int cells_v = 96;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares of log y against log x.
LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

// ---------------------------------------------------------------- chaos rate

struct RateConfig {
  field::Kernel kernel = field::Kernel::zero();
  particles::Order order = particles::Order::first;
  particles::F0Spec f0{};
  particles::F0Spec velocity{};
  double kappa = 0.0;
  std::vector<std::size_t> n_list{128, 256, 512, 1024};
  std::size_t seeds = 32;
  std::uint64_t master_seed = 0;
  double dt = 1.0 / 512.0;
  double horizon = 1.0;
  GridSpec grid{};
  PhaseGridSpec phase_grid{};
  double c = 1.0;
  std::size_t time_stride = 1;
  std::size_t atom_budget = 2048;
  std::size_t halving_seeds = 4;  // seeds rerun at dt / 2; 0 disables
  std::size_t bootstrap = 200;
  std::optional<covering::GammaCase> gamma_case;
  double moment_p = 4.0;
  bool self_interaction = true;
  std::size_t jobs = 1;
};

struct RateCell {
  std::size_t n = 0;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  double dt = 0.0;
  double statistic = 0.0;
  double initial = 0.0;
  bool failed = false;
  std::string failure;
  double wallclock_ms = 0.0;
};

struct RateAggregate {
  std::size_t n = 0;
  std::size_t completed = 0;
  double mean = 0.0;
  double std_error = 0.0;
  double subgaussian = 0.0;
};

struct HalvingRow {
  std::size_t n = 0;
  double mean_dt = 0.0;
  double mean_half_dt = 0.0;
};

struct RateReport {
  std::vector<RateCell> cells;
  std::vector<RateAggregate> aggregates;
  LineFit fit;
  double slope_lo = 0.0;  // 2.5% bootstrap quantile
  double slope_hi = 0.0;  // 97.5%
  std::optional<double> gamma_theory;
  std::string gamma_text;
  double envelope_constant = 0.0;
  bool envelope_holds = false;
  bool monotone = false;
  std::vector<HalvingRow> halving;
};

RateReport run_chaos_rate(const RateConfig& config);

// ---------------------------------------------------------------- Glivenko-Cantelli

struct GcConfig {
  std::vector<field::DriftField> net;
  particles::Order order = particles::Order::first;
  particles::F0Spec f0{};
  particles::F0Spec velocity{};
  double kappa = 0.0;
  std::vector<std::size_t> n_list{128, 256, 512, 1024};
  std::size_t seeds = 16;
  std::uint64_t master_seed = 0;
  double dt = 1.0 / 512.0;
  double horizon = 1.0;
  GridSpec grid{};
  PhaseGridSpec phase_grid{};
  double c = 1.0;
  std::size_t time_stride = 1;
  std::size_t atom_budget = 2048;
  std::size_t jobs = 1;
};

struct GcCell {
  std::size_t n = 0;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  std::vector<double> per_field;  // compensated statistic per net element
  double max_statistic = 0.0;
  std::size_t argmax = 0;
  bool failed = false;
  std::string failure;
};

struct GcReport {
  std::vector<GcCell> cells;
  std::vector<RateAggregate> aggregates;  // of max_statistic
  LineFit fit;
  bool monotone = false;
  bool dominance = false;
};

GcReport run_gc_experiment(const GcConfig& config);

// ---------------------------------------------------------------- coupling

struct CouplingConfig {
  field::Kernel kernel = field::Kernel::sine();
  particles::F0Spec f0{};
  std::size_t n = 512;
  std::uint64_t seed = 0;
  double dt = 1.0 / 512.0;
  double horizon = 1.0;
  GridSpec grid{};
  double mollifier = 0.0;  // > 0 smooths the kernel behind the frozen b^N
  double tolerance = 1e-8;
};

struct CouplingDecomposition {
  std::vector<double> times;
  std::vector<double> particle_to_limit;        // d(mu^N, f)
  std::vector<double> particle_to_frozen_pde;   // d(mu^N, f^{b^N})
  std::vector<double> frozen_pde_to_limit;      // d(f^{b^N}, f)
  std::vector<double> particle_to_auxiliary;    // d(mu^N, mu^{b^inf,N})
  std::vector<double> auxiliary_to_limit;       // d(mu^{b^inf,N}, f)
  bool new_route_holds = false;                 // via f^{b^N}
  bool sznitman_route_holds = false;            // via mu^{b^inf,N}
  double worst_excess = 0.0;                    // max of lhs - rhs over both routes
};

CouplingDecomposition run_coupling_decomposition(const CouplingConfig& config);

// ---------------------------------------------------------------- counterexample

struct CounterexampleConfig {
  std::vector<std::size_t> n_list{16, 64, 256};
  double horizon = 4.0;
  double dt = 1.0 / 256.0;
  std::size_t seeds = 64;
  std::uint64_t master_seed = 0;
  particles::F0Spec f0{};
  double g_width = 0.1;            // g(x) = tanh(x / g_width)
  double unsuppressed_target = 0.75;
  std::size_t pilot_seeds = 8;
  double initial_eps = 1.0;
  int max_halvings = 40;
  bool ablate_drift = false;
  std::size_t jobs = 1;
};

struct CounterexampleRow {
  std::size_t n = 0;
  double eps = 0.0;
  double pilot_unsuppressed = 0.0;  // pilot estimate of the time fraction with psi_eps = 1
  double mean_s = 0.0;
  double half_width = 0.0;          // 1.96 standard errors
  double mean_abs_s = 0.0;
  double ablation_mean_s = 0.0;
  double ablation_mean_abs_s = 0.0;
  double red_displacement = 0.0;    // mean over seeds and red particles of X_T - X_0
  double unsuppressed = 0.0;        // realized fraction of time with psi_eps = 1
  double predicted_push = 0.0;      // T (2 unsuppressed - 1)
  std::vector<double> per_seed_s;
  std::vector<double> per_seed_ablation;
};

struct CounterexampleReport {
  std::vector<CounterexampleRow> rows;
};

/// Smoothstep transition: 0 for |x| <= 1/2, 1 for |x| >= 1.
double psi(double x);
/// Bump with eta(0) = 1 vanishing for |x| >= 1/2.
double eta(double x);

CounterexampleReport run_counterexample(const CounterexampleConfig& config);

// ---------------------------------------------------------------- non-uniqueness

struct NonuniquenessConfig {
  double alpha = 0.5;
  std::vector<int> levels{4, 8, 16};
  std::size_t seeds = 50;
  std::uint64_t master_seed = 0;
  double horizon = 2.0;
  double dt = 1.0 / 1024.0;
  double gap_threshold = 0.5;
  std::size_t jobs = 1;
};

struct NonuniquenessReport {
  std::vector<int> levels;
  std::vector<std::vector<double>> gaps;  // [level][seed]
  std::vector<double> fraction_above;     // per level
  std::vector<double> mean_gap;
};

/// Spatially mollified drift min(|y|^alpha, 1) at level n: average over a symmetric
/// 32-point bump stencil of half-width 1/n^2.
double mollified_power(double y, double alpha, int level);

NonuniquenessReport run_nonuniqueness_demo(const NonuniquenessConfig& config);

// ---------------------------------------------------------------- time regularity

struct TimeRegularityConfig {
  field::Kernel kernel = field::Kernel::holder_power(0.5);
  particles::F0Spec f0{};
  std::vector<std::size_t> n_list{128, 256, 512, 1024};
  std::size_t seeds = 16;
  std::uint64_t master_seed = 0;
  double dt = 1.0 / 256.0;
  double horizon = 1.0;
  std::vector<double> a_scan;        // empty: 16 levels between 0 and 2 A*
  std::size_t probe_times = 9;
  std::size_t jobs = 1;
};

struct TimeRegularityReport {
  std::vector<std::size_t> n_list;
  std::vector<std::vector<double>> norms;       // [n][seed]
  std::vector<double> a_scan;
  std::vector<std::vector<double>> probability; // [n][a]
  double a_star = 0.0;
  std::vector<double> probability_at_a_star;    // per n
  bool decreasing_at_a_star = false;
};

TimeRegularityReport run_time_regularity(const TimeRegularityConfig& config);

// ---------------------------------------------------------------- kernel ULLN

struct UllnConfig {
  field::Kernel kernel = field::Kernel::sine();
  std::vector<field::DriftField> net;
  particles::F0Spec f0{};
  std::vector<std::size_t> n_list{64, 128, 256, 512};
  std::size_t seeds = 16;
  std::uint64_t master_seed = 0;
  std::size_t reference_n = 8192;
  std::uint64_t reference_seed = 0x5EFE;
  double dt = 1.0 / 128.0;
  double horizon = 1.0;
  std::size_t time_stride = 8;
  double weight_r = 1.0;
  bool q_infinite = false;  // false: q = 2
  double half_width = 8.0;
  int x_points = 257;
  std::size_t jobs = 1;
};

struct UllnReport {
  std::vector<std::size_t> n_list;
  std::vector<std::vector<double>> statistic;  // [n][seed]
  std::vector<double> mean;
  LineFit fit;
};

UllnReport run_ulln_for_kernel(const UllnConfig& config);
/// Statistic of a single (N, seed) cell against the configured reference run.
double ulln_statistic(const UllnConfig& config, std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------- energy estimate

struct EnergyCheckConfig {
  field::HolderBallSpec ball{};
  std::size_t net_size = 16;
  std::size_t pairs = 10;
  std::uint64_t seed = 0;
  particles::F0Spec f0{};
  GridSpec grid{};
  double horizon = 1.0;
  double dt = 1.0 / 256.0;
  pde::EnergyWeights weights{};
};

struct EnergyPair {
  std::size_t first = 0;
  std::size_t second = 0;
  pde::EnergyReport report;
};

struct EnergyCheckReport {
  std::vector<EnergyPair> pairs;
  std::size_t violations = 0;
  bool all_zero_at_start = false;
  bool all_finite = false;
};

EnergyCheckReport run_energy_check(const EnergyCheckConfig& config);

// ---------------------------------------------------------------- PDE self-test

struct PdeSelftestConfig {
  double initial_scale = 0.5;
  double half_width = 8.0;
  int cells = 512;
  double horizon = 1.0;
  double dt = 1.0 / 512.0;
  std::vector<int> halving_cells{64, 128, 256};
};

struct PdeSelftestReport {
  std::vector<double> times;
  std::vector<double> variance;
  std::vector<double> expected_variance;
  double worst_variance_rel_error = 0.0;
  double mass_drift = 0.0;
  std::vector<double> halving_distances;  // W1 between consecutive resolutions
  double contraction = 0.0;
};

PdeSelftestReport run_pde_selftest(const PdeSelftestConfig& config);

// ---------------------------------------------------------------- entropy

struct EntropyCheckConfig {
  std::vector<double> eps{0.4, 0.2, 0.1};
  double half_width = 2.0;
  double weight_p = 3.0;
  std::size_t trials = 50;
  std::size_t max_points = 12;
  double alpha = 0.5;
  std::uint64_t seed = 0;
};

struct EntropyRow {
  double eps = 0.0;
  double lip1_log_size = 0.0;
  std::size_t count_greedy = 0;
  std::size_t count_exact = 0;
  double bound_rhs = 0.0;  // H(eps, X) + H(eps, Y) of the product check on the first space pair
  std::size_t product_violations = 0;
  std::size_t metric_violations = 0;
  double lip1_worst_distance = 0.0;
};

struct EntropyReport {
  std::vector<EntropyRow> rows;
  double scaling_exponent = 0.0;
  double predicted_exponent = 1.0;
};

EntropyReport run_entropy_check(const EntropyCheckConfig& config);

}  // namespace chaoslab::experiments
