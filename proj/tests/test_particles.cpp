#include <doctest.h>

#include <cmath>
#include <numeric>

#include "chaoslab/drift_field.hpp"
#include "chaoslab/errors.hpp"
#include "chaoslab/particles.hpp"

using namespace chaoslab;
using namespace chaoslab::particles;

namespace {

SimConfig small_config(std::size_t n, double horizon, double dt, std::uint64_t seed) {
  SimConfig c;
  c.n = n;
  c.horizon = horizon;
  c.dt = dt;
  c.seed = seed;
  return c;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / (v.size() - 1);
}

}  // namespace

TEST_CASE("noise is deterministic, keyed and N(0, dt)") {
  NoiseStore a(42, 500, 1, 40, 0.01), b(42, 500, 1, 40, 0.01), c(43, 500, 1, 40, 0.01);
  CHECK(a.data() == b.data());
  CHECK(a.data() != c.data());
  const auto& d = a.data();
  const double m = mean_of(d), v = var_of(d);
  const double se_mean = std::sqrt(0.01 / d.size());
  CHECK(std::abs(m) < 5 * se_mean);
  // variance of the sample variance is about 2 sigma^4 / n
  CHECK(std::abs(v - 0.01) < 5 * 0.01 * std::sqrt(2.0 / d.size()));
}

TEST_CASE("initial laws have the declared moments") {
  const auto g = sample_initial({F0Family::gaussian, 1.5, 0.5, 4}, 40000, 1, 7);
  CHECK(mean_of(g) == doctest::Approx(1.5).epsilon(0.01));
  CHECK(var_of(g) == doctest::Approx(0.25).epsilon(0.03));
  const auto u = sample_initial({F0Family::uniform_box, 0.0, 1.0, 4}, 40000, 1, 7);
  F0Spec box{F0Family::uniform_box, 0.0, 1.0, 4};
  CHECK(var_of(u) == doctest::Approx(box.variance()).epsilon(0.03));
  for (double x : u) CHECK(std::abs(x) <= 1.0);
}

TEST_CASE("zero drift reproduces the running noise sum exactly") {
  auto cfg = small_config(64, 0.25, 1.0 / 64, 9);
  const auto noise = make_noise(cfg);
  const auto run = simulate_interacting(cfg, field::Kernel::zero(), noise);
  auto x = initial_state(cfg).positions;
  for (std::size_t k = 0; k < cfg.steps(); ++k) {
    const auto db = noise.step(k);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = (x[i] + 0.0) + db[i];
    CHECK(run.positions[k + 1] == x);
  }
}

TEST_CASE("constant drift translates the noise path") {
  auto cfg = small_config(16, 1.0, 1.0 / 32, 4);
  const auto noise = make_noise(cfg);
  const auto free = simulate_interacting(cfg, field::Kernel::zero(), noise);
  const auto pushed = simulate_frozen(cfg, field::DriftField::constant({0.5, 0.0}), noise);
  for (std::size_t i = 0; i < cfg.n; ++i)
    CHECK(pushed.positions.back()[i] - free.positions.back()[i] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("frozen empirical drift replays the interacting system bit for bit") {
  auto cfg = small_config(40, 0.5, 1.0 / 64, 21);
  const auto k = field::Kernel::holder_power(0.5);
  const auto noise = make_noise(cfg);
  const auto inter = simulate_interacting(cfg, k, noise);
  const auto field = field::DriftField::empirical(k, snapshot_series(inter), true);
  const auto frozen = simulate_frozen(cfg, field, noise);
  CHECK(frozen.positions == inter.positions);
}

TEST_CASE("interacting drift follows the pairwise sum") {
  auto cfg = small_config(8, 1.0 / 32, 1.0 / 32, 2);
  const auto noise = make_noise(cfg);
  const auto run = simulate_interacting(cfg, field::Kernel::sine(), noise);
  const auto& x = run.positions[0];
  for (std::size_t i = 0; i < 8; ++i) {
    double b = 0;
    for (double y : x) b += std::sin(x[i] - y);
    CHECK(run.positions[1][i] == doctest::Approx(x[i] + b / 8 * cfg.dt + noise.step(0)[i]).epsilon(1e-13));
  }
}

TEST_CASE("second order reference is the free transport") {
  auto cfg = small_config(5, 1.0, 0.125, 3);
  cfg.order = Order::second;
  cfg.kappa = 0.7;
  const auto init = initial_state(cfg);
  const auto ref = reference_trajectories(cfg, init);
  for (std::size_t k = 0; k <= cfg.steps(); ++k) {
    const double t = k * cfg.dt;
    for (std::size_t i = 0; i < 5; ++i) {
      const double v0 = init.velocities[i], x0 = init.positions[i];
      CHECK(ref.velocities[k][i] == doctest::Approx(v0 * std::exp(-0.7 * t)).epsilon(1e-12));
      CHECK(ref.positions[k][i] == doctest::Approx(x0 + v0 * (1 - std::exp(-0.7 * t)) / 0.7).epsilon(1e-12));
    }
  }
}

TEST_CASE("velocity law of the damped free dynamics") {
  // exact OU discretisation: V_T ~ N(v0 e^{-kT}, (1 - e^{-2kT}) / (2k))
  auto cfg = small_config(20000, 1.0, 1.0 / 16, 8);
  cfg.order = Order::second;
  cfg.kappa = 1.0;
  cfg.velocity = {F0Family::gaussian, 2.0, 1e-9, 4};
  const auto run = simulate_interacting(cfg, field::Kernel::zero(), make_noise(cfg));
  const auto& v = run.velocities.back();
  const double var = (1 - std::exp(-2.0)) / 2;
  CHECK(std::abs(mean_of(v) - 2.0 * std::exp(-1.0)) < 5 * std::sqrt(var / v.size()));
  CHECK(var_of(v) == doctest::Approx(var).epsilon(0.04));
}

TEST_CASE("configuration guards") {
  auto cfg = small_config(4, 1.0, 0.3, 0);
  CHECK_THROWS_AS(cfg.steps(), InvalidArgument);
  cfg = small_config(4, 1.0, 0.25, 0);
  NoiseStore wrong(0, 5, 1, 4, 0.25);
  CHECK_THROWS_AS(simulate_interacting(cfg, field::Kernel::zero(), wrong), InvalidArgument);
  cfg.divergence_radius = 2.0;
  CHECK_THROWS_AS(simulate_frozen(cfg, field::DriftField::constant({100.0, 0}), make_noise(cfg)), SimulationDiverged);
}

TEST_CASE("increment statistics against a hand computation") {
  auto cfg = small_config(3, 1.0, 0.25, 5);
  const auto init = initial_state(cfg);
  const auto run = simulate_frozen(cfg, field::DriftField::zero(), make_noise(cfg), init);
  const auto ref = reference_trajectories(cfg, init);
  const auto st = compensated_increment_stats(run, ref, {0.5}, 1.0 / 3.0);
  for (std::size_t i = 0; i < 3; ++i) {
    double sup = 0, mod = 0;
    for (std::size_t k = 0; k <= 4; ++k) {
      const double z = run.positions[k][i] - init.positions[i];
      sup = std::max(sup, std::abs(z));
      if (std::pow(k * 0.25, 1.0 / 3.0) <= 0.5) mod = std::max(mod, std::abs(z));
    }
    CHECK(st.sup_norm[i] == doctest::Approx(sup));
    CHECK(st.modulus[0][i] == doctest::Approx(mod));
  }
}

TEST_CASE("increment modulus scaling under window halving") {
  auto cfg = small_config(1000, 0.25, 1.0 / 1024, 12);
  const auto init = initial_state(cfg);
  const auto run = simulate_frozen(cfg, field::DriftField::zero(), make_noise(cfg), init);
  const auto ref = reference_trajectories(cfg, init);
  auto ratio = [&](double theta, double eps) {
    const auto st = compensated_increment_stats(run, ref, {eps, eps / 2}, theta);
    return mean_of(st.modulus[1]) / mean_of(st.modulus[0]);
  };
  // window |s - t|^theta <= eps has length eps^(1/theta); Brownian modulus grows like its square root
  const double half = ratio(0.5, 0.5);
  CHECK(half >= 0.4);
  CHECK(half <= 0.6);
  CHECK(ratio(1.0 / 3.0, 0.6) == doctest::Approx(std::pow(2.0, -1.5)).epsilon(0.15));
}

TEST_CASE("bounded drift keeps the compensated path within MT + sup|B|") {
  auto cfg = small_config(200, 1.0, 1.0 / 128, 13);
  const auto init = initial_state(cfg);
  const auto noise = make_noise(cfg);
  const auto drift = field::DriftField::net_element({{0.4, 3.0, 0.2}, {0.3, 1.0, 1.0}});
  const auto run = simulate_frozen(cfg, drift, noise, init);
  const auto free = simulate_frozen(cfg, field::DriftField::zero(), noise, init);
  const auto ref = reference_trajectories(cfg, init);
  const auto a = compensated_increment_stats(run, ref, {}, 1.0 / 3.0);
  const auto b = compensated_increment_stats(free, ref, {}, 1.0 / 3.0);
  for (std::size_t i = 0; i < cfg.n; ++i) CHECK(a.sup_norm[i] <= drift.sup_bound() * cfg.horizon + b.sup_norm[i] + 1e-12);
}
