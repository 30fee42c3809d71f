#pragma once

#include <memory>
#include <variant>
#include <vector>

#include "chaoslab/drift_field.hpp"
#include "chaoslab/grid.hpp"
#include "chaoslab/kernel.hpp"

namespace chaoslab::pde {

enum class DiffusionScheme { explicit_euler, implicit };

/// Finite-volume options. diffusion = 0 switches diffusion off (pure transport test mode).
struct FpOptions {
  DiffusionScheme scheme = DiffusionScheme::implicit;
  double diffusion = 0.5;
};

/// One splitting step: upwind advection by the drift sampled at cell faces, then diffusion.
/// Throws CflViolation when 2 d sup|b| dt > h, or for explicit diffusion when 2 d D dt > h^2.
void fp_step(GridDensity& density, const field::DriftField& drift, double dt, const FpOptions& options = {});

GridDensity evolve_linear_fp(GridDensity density, const field::DriftField& drift, double dt, std::size_t steps,
                             const FpOptions& options = {});
/// Every intermediate density, steps + 1 entries.
std::vector<GridDensity> evolve_linear_fp_path(GridDensity density, const field::DriftField& drift, double dt,
                                               std::size_t steps, const FpOptions& options = {});

struct McKeanPath {
  std::vector<GridDensity> densities;            // steps + 1 entries
  std::shared_ptr<field::GridSamples> drift;     // b^inf at cell centers per step
};

GridDensity evolve_mckean(GridDensity density, const field::Kernel& kernel, double dt, std::size_t steps,
                          const FpOptions& options = {});
McKeanPath evolve_mckean_path(GridDensity density, const field::Kernel& kernel, double dt, std::size_t steps,
                              const FpOptions& options = {});

/// Kinetic options; boundary_tolerance bounds the mass allowed in the outermost cells.
struct KineticOptions {
  DiffusionScheme scheme = DiffusionScheme::implicit;
  double diffusion = 0.5;
  double boundary_tolerance = 1e-6;
};

/// Frozen force field b(t, x), or a kernel for the nonlinear equation.
using KineticForce = std::variant<field::DriftField, field::Kernel>;

void kinetic_step(PhaseGridDensity& density, const KineticForce& force, double dt, const KineticOptions& options = {});
PhaseGridDensity evolve_kinetic(PhaseGridDensity density, const KineticForce& force, double dt, std::size_t steps,
                                const KineticOptions& options = {});
std::vector<PhaseGridDensity> evolve_kinetic_path(PhaseGridDensity density, const KineticForce& force, double dt,
                                                  std::size_t steps, const KineticOptions& options = {});

/// (sum_cells |f|^q <x>^{rq} vol)^{1/q} with f = mass / vol; masses may be signed.
double weighted_norm(const GridDensity& density, double r, double q);
double weighted_norm(const PhaseGridDensity& density, double r, double q);

/// Grid difference f - g of two densities on the same grid.
GridDensity difference(const GridDensity& f, const GridDensity& g);

struct EnergyWeights {
  double p = 2.0;  // weight exponent of the density norm L^{p,2}
  double r = 2.0;  // weight exponent of the drift norm L^{-r,q'}
  double q = 4.0;  // q' from 1/q + 1/q' = 1/2; q = inf gives q' = 2
};

struct EnergyReport {
  std::vector<double> times;
  std::vector<double> lhs;
  std::vector<double> rhs;
  double fitted_constant = 0.0;
  std::size_t violations = 0;
  bool lhs_zero_at_start = false;
};

double dual_exponent(double q);

/// Runs both linear equations from f0 and compares ||f^b_t - f^b~_t||_{L^{p,2}} against
/// the time integral of ||b_s - b~_s||_{L^{-r,q'}} on the grid.
EnergyReport verify_energy_estimate(const field::DriftField& b, const field::DriftField& b_tilde,
                                    const GridDensity& f0, double horizon, double dt, const EnergyWeights& weights,
                                    const FpOptions& options = {});

}  // namespace chaoslab::pde
