#include <doctest.h>

#include <cmath>
#include <random>

#include "chaoslab/drift_field.hpp"
#include "chaoslab/errors.hpp"
#include "chaoslab/kernel.hpp"

using namespace chaoslab;
using namespace chaoslab::field;

namespace {

std::vector<double> random_points(std::mt19937_64& gen, std::size_t n, double spread) {
  std::uniform_real_distribution<double> u(-spread, spread);
  std::vector<double> x(n);
  for (double& v : x) v = u(gen);
  return x;
}

// sum_j K(x_i, x_j) straight from the pointwise definition
std::vector<double> naive_sums(const std::function<double(double, double)>& k, const std::vector<double>& x) {
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (double xj : x) out[i] += k(x[i], xj);
  return out;
}

}  // namespace

TEST_CASE("pointwise closed forms") {
  const auto sine = Kernel::sine();
  CHECK(sine({0.3, 0}, {1.1, 0})[0] == doctest::Approx(std::sin(0.3 - 1.1)).epsilon(1e-15));
  const auto hp = Kernel::holder_power(0.5);
  CHECK(hp({0.25, 0}, {0, 0})[0] == doctest::Approx(0.5));
  CHECK(hp({0, 0}, {0.25, 0})[0] == doctest::Approx(-0.5));
  CHECK(hp({5, 0}, {0, 0})[0] == 1.0);
  CHECK(hp({1, 0}, {1, 0})[0] == 0.0);
  const auto even = Kernel::holder_power(0.5, 1, PowerShape::even);
  CHECK(even({0, 0}, {0.25, 0})[0] == doctest::Approx(0.5));
  const auto clamp = Kernel::clamp_attract();
  CHECK(clamp({0, 0}, {0.4, 0})[0] == doctest::Approx(0.4));
  CHECK(clamp({0, 0}, {-3, 0})[0] == -1.0);
  const auto lin = Kernel::linear_capped(2.0);
  CHECK(lin({3, 0}, {0, 0})[0] == doctest::Approx(2.0));
  CHECK(lin({0.5, 0}, {0, 0})[0] == doctest::Approx(0.5));
}

TEST_CASE("declared properties") {
  CHECK(Kernel::sine().antisymmetric());
  CHECK(Kernel::sine().bound() == doctest::Approx(1.0));
  CHECK(Kernel::holder_power(0.5).antisymmetric());
  CHECK(!Kernel::holder_power(0.5, 1, PowerShape::even).antisymmetric());
  CHECK(Kernel::holder_power(0.5).holder().alpha == doctest::Approx(0.5));
  CHECK(Kernel::zero().bound() == 0.0);
  CHECK(Kernel::sine().vanishes_on_diagonal());
  CHECK(Kernel::sine().translation_invariant());
  CHECK_THROWS(Kernel::holder_power(1.5));
  CHECK_THROWS(Kernel::holder_power(0.0));
}

TEST_CASE("fast interaction sums match the pairwise definition") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 5; ++trial) {
    const auto x = random_points(gen, 97, 3.0);
    const std::vector<std::pair<Kernel, std::function<double(double, double)>>> cases{
        {Kernel::sine(), [](double a, double b) { return std::sin(a - b); }},
        {Kernel::holder_power(0.5),
         [](double a, double b) {
           const double z = a - b;
           return z == 0 ? 0.0 : std::copysign(std::min(std::pow(std::abs(z), 0.5), 1.0), z);
         }},
        {Kernel::holder_power(0.3, 1, PowerShape::even),
         [](double a, double b) { return std::min(std::pow(std::abs(a - b), 0.3), 1.0); }},
        {Kernel::clamp_attract(), [](double a, double b) { return std::clamp(b - a, -1.0, 1.0); }},
    };
    for (const auto& [k, f] : cases) {
      std::vector<double> fast(x.size());
      k.sum_over_self(x, fast);
      const auto slow = naive_sums(f, x);
      for (std::size_t i = 0; i < x.size(); ++i) CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-11));
    }
  }
}

TEST_CASE("sums over separate sources") {
  std::mt19937_64 gen(5);
  const auto q = random_points(gen, 31, 2.0);
  const auto s = random_points(gen, 53, 2.0);
  for (const auto& k : {Kernel::sine(), Kernel::holder_power(0.7)}) {
    std::vector<double> out(q.size());
    k.sum_over_sources(q, s, out);
    for (std::size_t i = 0; i < q.size(); ++i) {
      double ref = 0;
      for (double y : s) ref += k({q[i], 0}, {y, 0})[0];
      CHECK(out[i] == doctest::Approx(ref).epsilon(1e-11));
    }
  }
}

TEST_CASE("two-dimensional sine sums") {
  std::mt19937_64 gen(9);
  const auto x = random_points(gen, 40, 2.0);  // 20 points in the plane
  const auto k = Kernel::sine(2);
  std::vector<double> out(x.size());
  k.sum_over_self(x, out);
  for (std::size_t i = 0; i < 20; ++i) {
    double r0 = 0, r1 = 0;
    for (std::size_t j = 0; j < 20; ++j) {
      r0 += std::sin(x[2 * i] - x[2 * j]);
      r1 += std::sin(x[2 * i + 1] - x[2 * j + 1]);
    }
    CHECK(out[2 * i] == doctest::Approx(r0).epsilon(1e-12));
    CHECK(out[2 * i + 1] == doctest::Approx(r1).epsilon(1e-12));
  }
}

TEST_CASE("tabulated kernel interpolates bilinearly") {
  // K(x, y) = x + 2y is reproduced exactly by bilinear interpolation
  std::string csv = "x,y,k1\n";
  for (double x : {-1.0, 0.0, 1.0})
    for (double y : {-2.0, 0.0, 2.0}) csv += std::to_string(x) + "," + std::to_string(y) + "," + std::to_string(x + 2 * y) + "\n";
  const auto k = Kernel::tabulated(parse_kernel_table(csv));
  CHECK(k({0.3, 0}, {-0.7, 0})[0] == doctest::Approx(0.3 - 1.4));
  CHECK(k({-0.5, 0}, {1.5, 0})[0] == doctest::Approx(-0.5 + 3.0));
  CHECK_THROWS_AS(parse_kernel_table("x,y,k1,k2\n0,0,1,1\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_kernel_table("x,y,k1\n0,0,1\n0,1,1\n1,0,1\n"), InvalidArgument);
}

TEST_CASE("mollified kernel is close to the original for small scale") {
  const auto base = Kernel::sine();
  const auto m = mollify_kernel(base, 1e-3);
  for (double x : {-1.0, 0.2, 2.5}) CHECK(m({x, 0}, {0.1, 0})[0] == doctest::Approx(std::sin(x - 0.1)).epsilon(1e-5));
  // Gaussian smoothing of sin damps by exp(-s^2/2)
  const auto wide = mollify_kernel(base, 0.5);
  CHECK(wide({1.0, 0}, {0, 0})[0] == doctest::Approx(std::exp(-0.125) * std::sin(1.0)).epsilon(1e-3));
}

TEST_CASE("interaction drift with and without self-interaction") {
  std::mt19937_64 gen(3);
  const auto x = random_points(gen, 25, 1.0);
  const auto k = Kernel::clamp_attract();
  std::vector<double> with(x.size()), without(x.size());
  interaction_drift(k, x, true, with);
  interaction_drift(k, x, false, without);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double s = 0;
    for (double y : x) s += std::clamp(y - x[i], -1.0, 1.0);
    CHECK(with[i] == doctest::Approx(s / 25).epsilon(1e-12));
    CHECK(without[i] == doctest::Approx(s / 24).epsilon(1e-12));  // K(x,x) = 0
  }
}

TEST_CASE("mean-field drift of a point mass") {
  GridDensity g(1, 4.0, 64);
  g.mass[40] = 1.0;
  const double c = g.center(40);
  const auto vals = mean_field_values(Kernel::sine(), g);
  for (int i = 0; i < 64; ++i) CHECK(vals[i] == doctest::Approx(std::sin(g.center(i) - c)).epsilon(1e-12));
}

TEST_CASE("net elements respect the Hoelder ball") {
  HolderBallSpec spec{0.75, 1.0, 2, 8.0, 0};
  const auto net = holder_net(spec, 12);
  REQUIRE(net.size() == 12);
  CHECK(net[0].sup_bound() == 0.0);
  for (const auto& b : net) {
    CHECK(fourier_holder_bound(b.modes(), 0.75) <= 1.0 + 1e-9);
    HolderProbe probe;
    probe.alpha = 0.75;
    probe.times = {0.0, 0.5};
    CHECK(estimate_holder_norm(b, probe) <= 1.0 + 1e-9);
  }
}

TEST_CASE("grid-backed drift interpolates and picks slices by time") {
  auto s = std::make_shared<GridSamples>();
  s->half_width = 2.0;
  s->nodes_per_axis = 4;  // centres -1.5, -0.5, 0.5, 1.5
  s->dt = 0.5;
  s->slices = {{0, 1, 2, 3}, {10, 10, 10, 10}};
  const auto b = DriftField::grid(s, 1.0, 10.0);
  CHECK(b(0.1, {0.0, 0})[0] == doctest::Approx(1.5));
  CHECK(b(0.1, {-0.5, 0})[0] == doctest::Approx(1.0));
  CHECK(b(0.7, {0.0, 0})[0] == doctest::Approx(10.0));
  CHECK(b(1.0, {0.0, 0})[0] == doctest::Approx(10.0));
}
