#include <doctest.h>

#include <cmath>

#include "chaoslab/errors.hpp"
#include "chaoslab/particles.hpp"
#include "chaoslab/pde.hpp"

using namespace chaoslab;
using namespace chaoslab::pde;

namespace {

GridDensity gaussian(double mean, double scale, double L, int cells) {
  particles::F0Spec f{particles::F0Family::gaussian, mean, scale, 4};
  return f.density_on_grid(1, L, cells);
}

}  // namespace

TEST_CASE("heat flow grows the variance by t") {
  auto f = gaussian(0.0, 0.5, 8.0, 512);
  const double v0 = f.variance();
  const auto path = evolve_linear_fp_path(f, field::DriftField::zero(), 1.0 / 256, 256);
  for (std::size_t k = 0; k < path.size(); k += 32) {
    CHECK(path[k].variance() == doctest::Approx(v0 + k / 256.0).epsilon(1e-3));
    CHECK(path[k].total_mass() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("constant drift moves the mean at speed c") {
  auto f = gaussian(-1.0, 0.5, 8.0, 512);
  const auto g = evolve_linear_fp(f, field::DriftField::constant({0.75, 0}), 1.0 / 256, 256);
  CHECK(g.mean()[0] == doctest::Approx(-0.25).epsilon(5e-3));
  CHECK(g.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pure transport without diffusion") {
  auto f = gaussian(0.0, 0.5, 8.0, 256);
  FpOptions opt;
  opt.diffusion = 0.0;
  const auto g = evolve_linear_fp(f, field::DriftField::constant({1.0, 0}), 1.0 / 32, 32, opt);
  CHECK(g.mean()[0] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("explicit and implicit diffusion agree") {
  auto f = gaussian(0.0, 0.5, 6.0, 96);
  FpOptions ex;
  ex.scheme = DiffusionScheme::explicit_euler;
  const double dt = 1.0 / 1024;
  const auto a = evolve_linear_fp(f, field::DriftField::zero(), dt, 512, ex);
  const auto b = evolve_linear_fp(f, field::DriftField::zero(), dt, 512);
  CHECK(a.variance() == doctest::Approx(b.variance()).epsilon(1e-3));
}

TEST_CASE("CFL guard") {
  auto f = gaussian(0.0, 0.5, 1.0, 64);
  CHECK_THROWS_AS(fp_step(f, field::DriftField::constant({10.0, 0}), 0.1), CflViolation);
  FpOptions ex;
  ex.scheme = DiffusionScheme::explicit_euler;
  CHECK_THROWS_AS(fp_step(f, field::DriftField::zero(), 0.01, ex), CflViolation);
}

TEST_CASE("McKean with the zero kernel is the heat flow") {
  auto f = gaussian(0.3, 0.5, 8.0, 256);
  const auto a = evolve_mckean(f, field::Kernel::zero(), 1.0 / 128, 64);
  const auto b = evolve_linear_fp(f, field::DriftField::zero(), 1.0 / 128, 64);
  CHECK(a.mass == b.mass);
}

TEST_CASE("McKean with an attractive kernel contracts the variance") {
  auto f = gaussian(0.0, 1.0, 8.0, 256);
  FpOptions opt;
  opt.diffusion = 0.0;
  const auto g = evolve_mckean(f, field::Kernel::clamp_attract(), 1.0 / 128, 128, opt);
  CHECK(g.variance() < f.variance());
  CHECK(g.mean()[0] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("weighted norms and dual exponents") {
  GridDensity g(1, 2.0, 4);  // centres -1.5, -0.5, 0.5, 1.5; width 1
  g.mass = {0.0, 0.5, -0.5, 0.0};
  const double w = std::sqrt(1.25);
  CHECK(weighted_norm(g, 1.0, 1.0) == doctest::Approx(2 * 0.5 * w));
  CHECK(weighted_norm(g, 0.0, 2.0) == doctest::Approx(std::sqrt(0.5)));
  CHECK(dual_exponent(4.0) == doctest::Approx(4.0));
  CHECK(dual_exponent(6.0) == doctest::Approx(3.0));
  CHECK(dual_exponent(INFINITY) == 2.0);
  CHECK_THROWS_AS(dual_exponent(2.0), InvalidArgument);
}

TEST_CASE("kinetic transport shifts the position mean by the mean velocity") {
  PhaseGridDensity f(10.0, 8.0, 160, 128, 0.0);
  for (int i = 0; i < 160; ++i)
    for (int j = 0; j < 128; ++j) {
      const double x = f.x_center(i), v = f.v_center(j) - 1.0;
      f.mass[static_cast<std::size_t>(i) * 128 + j] = std::exp(-2 * x * x - 2 * v * v);
    }
  double total = f.total_mass();
  for (double& m : f.mass) m /= total;
  const auto g = evolve_kinetic(f, field::DriftField::zero(), 1.0 / 64, 64);
  CHECK(g.total_mass() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(g.x_marginal().mean()[0] == doctest::Approx(1.0).epsilon(0.02));
  CHECK(g.v_marginal().mean()[0] == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("energy estimate holds for two smooth fields") {
  auto f = gaussian(0.0, 0.7, 8.0, 256);
  const auto b = field::DriftField::net_element({{0.3, 1.0, 0.0}});
  const auto c = field::DriftField::net_element({{0.2, 2.0, 0.5}});
  const auto rep = verify_energy_estimate(b, c, f, 1.0, 1.0 / 128, {});
  CHECK(rep.lhs_zero_at_start);
  CHECK(rep.violations == 0);
  for (std::size_t k = 0; k < rep.lhs.size(); ++k) CHECK(std::isfinite(rep.lhs[k]));
  const auto same = verify_energy_estimate(b, b, f, 1.0, 1.0 / 128, {});
  for (double v : same.lhs) CHECK(v == 0.0);
}
