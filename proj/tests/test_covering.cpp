#include <doctest.h>

#include <cmath>
#include <random>

#include "chaoslab/covering.hpp"
#include "chaoslab/errors.hpp"

using namespace chaoslab;
using namespace chaoslab::covering;

namespace {

using Table = std::vector<std::vector<double>>;

// Smallest subset size covering everything, by scanning all 2^n masks.
std::size_t brute_cover(const FiniteMetricSpace& s, double eps) {
  const std::size_t n = s.size();
  std::size_t best = n;
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    const auto k = static_cast<std::size_t>(__builtin_popcount(mask));
    if (k >= best) continue;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      bool hit = false;
      for (std::size_t c = 0; c < n && !hit; ++c)
        hit = ((mask >> c) & 1u) && s.distance(i, c) <= eps * (1 + 1e-12);
      ok = hit;
    }
    if (ok) best = k;
  }
  return best;
}

FiniteMetricSpace random_points(std::mt19937_64& gen, std::size_t n, int dim) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(n * dim);
  for (double& x : p) x = u(gen);
  return FiniteMetricSpace::from_points(p, dim);
}

}  // namespace

TEST_CASE("metric space validation") {
  CHECK_THROWS_AS(FiniteMetricSpace(Table{{0, 1}, {2, 0}}), InvalidArgument);
  CHECK_THROWS_AS(FiniteMetricSpace(Table{{0, 1, 5}, {1, 0, 1}, {5, 1, 0}}), InvalidArgument);
  CHECK_NOTHROW(FiniteMetricSpace(Table{{0, 1, 5}, {1, 0, 1}, {5, 1, 0}}, false));
  CHECK_THROWS_AS(FiniteMetricSpace(Table{{1}}), InvalidArgument);
}

TEST_CASE("exact covering matches subset enumeration") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 30; ++trial) {
    const auto s = random_points(gen, 6 + trial % 8, 1 + trial % 2);
    for (double eps : {0.1, 0.25, 0.5}) {
      const auto ex = covering_number_exact(s, eps);
      CHECK(ex.count == brute_cover(s, eps));
      CHECK(is_eps_net(s, ex.net, eps));
      const auto gr = covering_number_greedy(s, eps);
      CHECK(gr.count >= ex.count);
      CHECK(is_eps_net(s, gr.net, eps));
    }
  }
}

TEST_CASE("exact covering size guard") {
  std::mt19937_64 gen(3);
  CHECK_THROWS_AS(covering_number_exact(random_points(gen, 21, 1), 0.1), TooLarge);
}

TEST_CASE("equally spaced points") {
  // 0, 1, ..., 9 with eps = 1: each ball holds three points, so 4 centres.
  std::vector<double> p(10);
  for (int i = 0; i < 10; ++i) p[i] = i;
  const auto s = FiniteMetricSpace::from_points(p, 1);
  CHECK(covering_number_exact(s, 1.0).count == 4);
  CHECK(covering_number_exact(s, 0.5).count == 10);
}

TEST_CASE("product and change of metric") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = random_points(gen, 4, 1), y = random_points(gen, 4, 2);
    const auto rep = product_entropy_check(x, y, 0.3);
    CHECK(rep.product_exact);
    CHECK(rep.product_net_valid);
    CHECK(rep.holds);
    const auto xy = FiniteMetricSpace::product(x, y);
    CHECK(std::exp(rep.entropy_product) == doctest::Approx(brute_cover(xy, 0.3)));

    const auto s = random_points(gen, 12, 2);
    for (double a : {0.3, 0.5, 1.0}) {
      const auto cm = change_of_metric_check(s, a, 0.5);
      CHECK(cm.holds);
      CHECK(cm.count_power == brute_cover(s.power(a), 0.5));
    }
  }
}

TEST_CASE("lip1 net covers random Lipschitz functions") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double eps : {0.4, 0.2, 0.1}) {
    const auto net = lip1_net(eps, 2.0, 3.0);
    CHECK(net.log_size == doctest::Approx(2.0 * std::ceil(4.0 / eps) * std::log(3.0)));
    for (int trial = 0; trial < 20; ++trial) {
      // Random sum of sines with total Lipschitz constant at most 1.
      double a[4], w[4], ph[4], tot = 0.0;
      for (int k = 0; k < 4; ++k) {
        a[k] = u(gen), w[k] = 1.0 + 10.0 * std::abs(u(gen)), ph[k] = 3.0 * u(gen);
        tot += std::abs(a[k]) * w[k];
      }
      auto h = [&](double x) {
        double s = 0.0;
        for (int k = 0; k < 4; ++k) s += a[k] * std::sin(w[k] * x + ph[k]) / tot;
        return s;
      };
      const auto v = net.snap(h);
      for (std::size_t i = 1; i < v.size(); ++i) CHECK(std::abs(v[i] - v[i - 1]) <= net.pitch * (1 + 1e-12));
      const double h0 = h(0.0);
      for (std::size_t i = 0; i < v.size(); ++i)
        CHECK(std::abs(v[i] - (h(net.nodes()[i]) - h0)) <= eps / 4 + 1e-12);
      CHECK(net.weighted_distance(v, h, 4001) <= eps);
    }
  }
  CHECK(lip1_net(0.1, 2.0, 1.5).predicted_exponent == doctest::Approx(2.0));
  CHECK_THROWS_AS(lip1_net(0.1, 2.0, 1.0), InvalidArgument);
}

TEST_CASE("lip1 element digits") {
  const auto net = lip1_net(1.0, 1.0, 3.0);  // pitch 1/2, K = 2
  const auto v = net.element({2, 0, 2, 1});
  REQUIRE(v.size() == 5);
  CHECK(v[2] == 0.0);
  CHECK(v[1] == 0.5);
  CHECK(v[0] == 0.0);
  CHECK(v[3] == 0.5);
  CHECK(v[4] == 0.5);
}

TEST_CASE("rate exponents") {
  using R = Rational;
  CHECK(gamma_first_order(HolderCase{R(1)}, R(3), 1) == R(1, 5));
  CHECK(gamma_first_order(HolderCase{R(1, 2)}, R(4), 1) == R(1, 14));
  CHECK(gamma_second_order(HolderCase{R(3, 4)}, R(4), 1) == R(9, 50));
  CHECK(gamma_second_order(SobolevCase{R(3, 2), std::nullopt}, R(4), 1) == R(3, 10));
  CHECK_NOTHROW(gamma_second_order(HolderCase{to_rational(0.67)}, R(4), 1));
  CHECK_THROWS_AS(gamma_second_order(HolderCase{to_rational(0.66)}, R(4), 1), HypothesisViolation);
  try {
    gamma_second_order(HolderCase{R(1, 2)}, R(4), 1);
  } catch (const HypothesisViolation& e) {
    CHECK(std::string(e.what()).find("greater than 2/3") != std::string::npos);
  }
  CHECK_THROWS_AS(gamma_first_order(HolderCase{R(1)}, R(2), 1), HypothesisViolation);
  CHECK_THROWS_AS(gamma_first_order(SobolevCase{R(1, 2), R(4)}, R(3), 1), HypothesisViolation);
  CHECK(gamma_first_order(SobolevCase{R(1), R(10)}, R(3), 1) == R(1, 5));
  CHECK_THROWS_AS(gamma_second_order(SobolevCase{R(1), std::nullopt}, R(3, 2), 1), HypothesisViolation);
  CHECK(to_rational(0.75) == R(3, 4));
  CHECK(to_rational(1.0 / 3.0) == R(1, 3));
  CHECK(to_string(R(9, 50)) == "9/50");
}

TEST_CASE("covering examples on grids") {
  std::vector<double> g(11);
  for (int k = 0; k <= 10; ++k) g[k] = 0.1 * k;
  const auto grid = FiniteMetricSpace::from_points(g, 1);
  CHECK(covering_number_greedy(grid, 0.1).count <= 11);
  CHECK(covering_number_greedy(FiniteMetricSpace::from_points({0.3}, 1), 0.1).count == 1);

  const auto point = FiniteMetricSpace::from_points({0.0}, 1);
  const auto single = product_entropy_check(grid, point, 0.1);
  CHECK(single.entropy_product == doctest::Approx(single.entropy_x));
  const auto sq = product_entropy_check(grid, grid, 0.1);
  CHECK(sq.product_net_size <= 121);
  CHECK(sq.holds);

  const auto two = FiniteMetricSpace::from_points({0.0, 0.04}, 1);
  const auto cm = change_of_metric_check(two, 0.5, 0.2);
  CHECK(cm.count_power == 1);
  CHECK(cm.count_base == 1);
  CHECK(cm.holds);
}

// Greedy centres are pairwise more than eps apart, so no eps/2-ball holds two of them.
TEST_CASE("greedy bounded by the half-scale cover and monotone in eps") {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = random_points(gen, 12, 2);
    std::size_t prev = 0;
    for (double eps : {0.6, 0.4, 0.3, 0.2, 0.1}) {
      const auto gr = covering_number_greedy(s, eps).count;
      const auto ex = covering_number_exact(s, eps).count;
      CHECK(gr >= ex);
      CHECK(gr <= covering_number_exact(s, eps / 2).count);
      CHECK(ex >= prev);
      prev = ex;
    }
  }
}

TEST_CASE("rate exponents are monotone") {
  using R = Rational;
  R prev(0);
  for (int k = 1; k <= 10; ++k) {
    const R g = gamma_first_order(HolderCase{R(k, 10)}, R(3), 1);
    CHECK(g > prev);
    prev = g;
  }
  CHECK(gamma_first_order(HolderCase{R(1)}, R(1000), 1) == R(1, 5));
  CHECK(gamma_first_order(HolderCase{R(1)}, R(5, 4), 1) < gamma_first_order(HolderCase{R(1)}, R(3), 1));
}
