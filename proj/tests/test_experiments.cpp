#include <doctest.h>

#include <atomic>
#include <cmath>
#include <set>
#include <stdexcept>

#include "chaoslab/errors.hpp"
#include "chaoslab/experiments.hpp"

using namespace chaoslab;
using namespace chaoslab::experiments;

TEST_CASE("task pool covers every index and rethrows") {
  std::vector<int> hits(100, 0);
  run_tasks(100, 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(run_tasks(10, 3, [](std::size_t i) { if (i == 7) throw std::runtime_error("x"); }),
                  std::runtime_error);
}

TEST_CASE("sub-run seeds are distinct") {
  std::set<std::uint64_t> seen;
  for (std::size_t n : {128, 256, 512})
    for (std::size_t r = 0; r < 64; ++r) seen.insert(subrun_seed(1, n, r));
  CHECK(seen.size() == 3 * 64);
  CHECK(subrun_seed(1, 128, 0) != subrun_seed(2, 128, 0));
}

TEST_CASE("log-log fit recovers a power law") {
  std::vector<double> x{10, 20, 40, 80}, y;
  for (double v : x) y.push_back(3.0 * std::pow(v, -0.4));
  const auto f = fit_loglog(x, y);
  CHECK(f.slope == doctest::Approx(-0.4).epsilon(1e-12));
  CHECK(std::exp(f.intercept) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("cutoff and bump shapes") {
  CHECK(psi(0.0) == 0.0);
  CHECK(psi(0.5) == 0.0);
  CHECK(psi(1.0) == 1.0);
  CHECK(psi(-3.0) == 1.0);
  CHECK(psi(0.75) == doctest::Approx(0.5));
  for (double x = 0.5; x < 1.0; x += 0.01) CHECK(psi(x + 0.01) >= psi(x));
  CHECK(eta(0.0) == 1.0);
  CHECK(eta(0.5) == 0.0);
  CHECK(eta(0.25) == doctest::Approx(std::exp(1.0 - 1.0 / 0.75)));
  CHECK(eta(-0.25) == eta(0.25));
}

TEST_CASE("mollified power drift converges to the power law") {
  for (double y : {-0.7, 0.3, 2.0}) {
    const double exact = std::min(std::pow(std::abs(y), 0.5), 1.0);
    CHECK(mollified_power(y, 0.5, 64) == doctest::Approx(exact).epsilon(1e-4));
  }
  CHECK(mollified_power(0.0, 0.5, 4) > 0.0);
}

TEST_CASE("small chaos-rate run is reproducible across thread counts") {
  RateConfig c;
  c.kernel = field::Kernel::sine();
  c.n_list = {16, 32, 64, 128};
  c.seeds = 3;
  c.dt = 1.0 / 64;
  c.horizon = 0.25;
  c.grid = {6.0, 128};
  c.bootstrap = 10;
  c.halving_seeds = 1;
  c.gamma_case = covering::HolderCase{covering::Rational(1)};
  const auto a = run_chaos_rate(c);
  c.jobs = 3;
  const auto b = run_chaos_rate(c);
  REQUIRE(a.cells.size() == b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) CHECK(a.cells[i].statistic == b.cells[i].statistic);
  CHECK(a.aggregates.size() == 4);
  CHECK(a.halving.size() == 4);
  REQUIRE(a.gamma_theory.has_value());
  CHECK(*a.gamma_theory == doctest::Approx(1.0 / 5.0));
  c.n_list = {16, 32, 64};
  CHECK_THROWS(run_chaos_rate(c));
}

TEST_CASE("coupling routes with the zero kernel collapse") {
  CouplingConfig c;
  c.kernel = field::Kernel::zero();
  c.n = 64;
  c.dt = 1.0 / 64;
  c.horizon = 0.5;
  c.grid = {6.0, 128};
  const auto r = run_coupling_decomposition(c);
  CHECK(r.new_route_holds);
  CHECK(r.sznitman_route_holds);
  for (double v : r.particle_to_auxiliary) CHECK(v == 0.0);
}

TEST_CASE("pde self-test at small size") {
  PdeSelftestConfig c;
  c.cells = 256;
  c.dt = 1.0 / 128;
  const auto r = run_pde_selftest(c);
  CHECK(r.worst_variance_rel_error < 1e-2);
  CHECK(r.mass_drift < 1e-10);
}

TEST_CASE("entropy check at small size") {
  EntropyCheckConfig c;
  c.trials = 4;
  c.max_points = 8;
  const auto r = run_entropy_check(c);
  REQUIRE(r.rows.size() == 3);
  for (const auto& row : r.rows) {
    CHECK(row.product_violations == 0);
    CHECK(row.metric_violations == 0);
    CHECK(row.lip1_worst_distance <= row.eps);
  }
}

TEST_CASE("non-uniqueness control with a Lipschitz drift") {
  NonuniquenessConfig c;
  c.alpha = 1.0;
  c.levels = {8};
  c.seeds = 4;
  c.dt = 1.0 / 256;
  const auto r = run_nonuniqueness_demo(c);
  CHECK(r.fraction_above[0] == 0.0);
}
