#pragma once

#include <boost/rational.hpp>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace chaoslab::covering {

/// Finite (semi-)metric space held as a distance table.
class FiniteMetricSpace {
 public:
  /// Validates d(x,x) = 0, symmetry, non-negativity; the triangle inequality only if `metric`.
  explicit FiniteMetricSpace(std::vector<std::vector<double>> table, bool metric = true);
  static FiniteMetricSpace from_points(const std::vector<double>& points, int dim);
  static FiniteMetricSpace from_callback(std::size_t n, const std::function<double(std::size_t, std::size_t)>& d,
                                         bool metric = true);

  std::size_t size() const noexcept { return table_.size(); }
  double distance(std::size_t i, std::size_t j) const { return table_.at(i).at(j); }
  bool is_metric() const noexcept { return metric_; }
  /// The snowflake d^alpha, alpha in (0, 1].
  FiniteMetricSpace power(double alpha) const;
  /// X x Y with the max metric; element (i, j) has index i * |Y| + j.
  static FiniteMetricSpace product(const FiniteMetricSpace& x, const FiniteMetricSpace& y);

 private:
  std::vector<std::vector<double>> table_;
  bool metric_;
};

struct CoverResult {
  std::size_t count = 0;
  std::vector<std::size_t> net;
};

/// True when every element lies within eps of some net point (relative slack 1e-12).
bool is_eps_net(const FiniteMetricSpace& space, const std::vector<std::size_t>& net, double eps);

/// Farthest-point greedy net; deterministic, starts from element 0. Asserts coverage.
CoverResult covering_number_greedy(const FiniteMetricSpace& space, double eps);

inline constexpr std::size_t kMaxExhaustive = 20;

/// Minimal net by exhaustive search over subsets of increasing size; TooLarge above kMaxExhaustive.
CoverResult covering_number_exact(const FiniteMetricSpace& space, double eps);

struct ProductReport {
  double eps = 0.0;
  double entropy_x = 0.0;        // log N(eps, X), exact when |X| small enough, else greedy
  double entropy_y = 0.0;
  double entropy_product = 0.0;  // log of the best available cover of X x Y
  std::size_t product_net_size = 0;
  bool product_net_valid = false;
  bool product_exact = false;
  bool holds = false;  // entropy_product <= entropy_x + entropy_y and the product net covers
};

ProductReport product_entropy_check(const FiniteMetricSpace& x, const FiniteMetricSpace& y, double eps);

struct ChangeOfMetricReport {
  double alpha = 1.0;
  double eps = 0.0;
  std::size_t count_power = 0;   // N(eps, d^alpha)
  std::size_t count_base = 0;    // N(eps^{1/alpha}, d)
  bool base_net_covers_power = false;
  bool holds = false;
};

ChangeOfMetricReport change_of_metric_check(const FiniteMetricSpace& space, double alpha, double eps);

/// Piecewise-linear Lip1 functions on [-L, L] vanishing at 0, with nodes at pitch eps/2,
/// node values on (eps/2) Z and slopes in {-1, 0, 1}.
struct Lip1Net {
  double eps = 0.0;
  double half_width = 0.0;
  double weight_exponent = 0.0;
  double pitch = 0.0;
  std::size_t nodes_per_side = 0;
  double log_size = 0.0;  // 2 K log 3, K = nodes_per_side
  double predicted_exponent = 1.0;

  /// Node positions -K pitch, ..., K pitch.
  std::vector<double> nodes() const;
  /// Net element (node values) closest to h by sequential snapping outward from 0.
  std::vector<double> snap(const std::function<double(double)>& h) const;
  /// Element with the given base-3 step digits (0: down, 1: flat, 2: up), outward from 0.
  std::vector<double> element(const std::vector<int>& steps) const;
  double evaluate(const std::vector<double>& values, double x) const;
  /// sup over the probe grid of <x>^{-p} |g(x) - h(x)|.
  double weighted_distance(const std::vector<double>& values, const std::function<double(double)>& h,
                           std::size_t resolution) const;
};

Lip1Net lip1_net(double eps, double half_width, double weight_exponent, int dim = 1);

using Rational = boost::rational<std::int64_t>;

/// Best rational approximation with denominator <= 10^6; exact for short decimals.
Rational to_rational(double x);

struct HolderCase {
  Rational alpha;
};
struct SobolevCase {
  Rational s;
  std::optional<Rational> q;  // nullopt means q = infinity
};
using GammaCase = std::variant<HolderCase, SobolevCase>;

/// Supremal exponent of the first-order propagation-of-chaos theorem; throws HypothesisViolation.
Rational gamma_first_order(const GammaCase& c, Rational p, int d);
/// Exponent of the second-order theorem, including the s <= 1 / s > 1 split of the Sobolev case.
Rational gamma_second_order(const GammaCase& c, Rational p, int d);

std::string to_string(Rational r);

}  // namespace chaoslab::covering
