#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "chaoslab/grid.hpp"
#include "chaoslab/particles.hpp"

namespace chaoslab::transport {

/// Weighted point cloud; atoms flat with stride dim, weights summing to 1.
struct DiscreteMeasure {
  int dim = 1;
  std::vector<double> atoms;
  std::vector<double> weights;

  std::size_t size() const noexcept { return weights.size(); }
  Vec atom(std::size_t i) const noexcept { return point_at(atoms, i, dim); }
};

/// Checks shape, non-negativity and unit total weight (within 1e-12).
DiscreteMeasure make_measure(int dim, std::vector<double> atoms, std::vector<double> weights);
/// Equal weights 1/N on the given points.
DiscreteMeasure uniform_measure(int dim, std::vector<double> atoms);

struct PlanEntry {
  std::size_t source = 0;
  std::size_t target = 0;
  double mass = 0.0;
};

struct TransportResult {
  double value = 0.0;
  std::vector<PlanEntry> plan;
  std::vector<double> source_potential;  // u_i
  std::vector<double> target_potential;  // v_j, with u_i + v_j <= c_ij
  std::string method;
};

inline constexpr std::size_t kMaxTransportArcs = 4'000'000;

/// Balanced transportation problem min sum c_ij x_ij solved by a primal network simplex.
/// cost is row-major m x n. Throws TooLarge if m n exceeds kMaxTransportArcs.
TransportResult solve_transport(std::span<const double> supply, std::span<const double> demand,
                                std::span<const double> cost);

/// mu^N_t with equal weights; second order concatenates (x, v).
DiscreteMeasure empirical_measure(const particles::TrajectoryBundle& bundle, std::size_t step);

/// Exact W1 in one dimension by integrating |F - G|.
double w1_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu);
/// Exact W1 between atoms and the piecewise-constant density whose cell masses are given.
double w1_1d(const DiscreteMeasure& mu, const GridDensity& density);
/// Exact W1 between two piecewise-constant densities (grids may differ).
double w1_1d(const GridDensity& f, const GridDensity& g);

/// Exact W1 with Euclidean ground cost.
TransportResult w1_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

inline constexpr std::size_t kMaxBlAtoms = 2000;

/// Bounded-Lipschitz distance, computed as transport with cost min(|z - z'|, 2).
double dbl(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

enum class AtomMode { strict, coarsen };

/// One atom per cell with mass above drop_threshold at the cell center, renormalised.
/// strict: TooLarge when more than atom_budget cells survive; coarsen: merge 2^k blocks.
DiscreteMeasure grid_to_measure(const GridDensity& density, std::size_t atom_budget,
                                AtomMode mode = AtomMode::strict, double drop_threshold = 1e-12);
DiscreteMeasure grid_to_measure(const PhaseGridDensity& density, std::size_t atom_budget,
                                AtomMode mode = AtomMode::strict, double drop_threshold = 1e-12);

enum class StatisticMode { first_order, second_order };

struct SupStatistic {
  double value = 0.0;              // sup_t d(mu_t, f_t) - c d(mu_0, f_0), positive part in second order
  double initial = 0.0;            // d(mu_0, f_0)
  std::vector<double> distances;   // d(mu_t, f_t) at every evaluated step
  std::vector<std::size_t> steps;  // evaluated steps
  double discretisation_bias = 0.0;
};

/// First order, d = 1: exact distance to the piecewise-constant f_t. d = 2: grid atoms plus w1_exact.
SupStatistic compensated_sup_statistic(const particles::TrajectoryBundle& bundle,
                                       const std::vector<GridDensity>& pde_path, double c = 1.0,
                                       std::size_t atom_budget = 4096, std::size_t time_stride = 1);
SupStatistic compensated_sup_statistic(const particles::TrajectoryBundle& bundle,
                                       const std::vector<PhaseGridDensity>& pde_path, double c,
                                       std::size_t atom_budget = 2048, std::size_t time_stride = 1);

/// max over p in {1, 2, 4, 8, 16} of p^{-1/2} (mean |X|^p)^{1/p}; needs >= 16 samples.
double subgaussian_norm_estimate(std::span<const double> samples);

}  // namespace chaoslab::transport
