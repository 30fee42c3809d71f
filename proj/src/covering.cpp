#include "chaoslab/covering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "chaoslab/errors.hpp"

namespace chaoslab::covering {

namespace {

constexpr double kSlack = 1e-12;

bool within(double d, double eps) { return d <= eps * (1.0 + kSlack); }

}  // namespace

FiniteMetricSpace::FiniteMetricSpace(std::vector<std::vector<double>> table, bool metric)
    : table_(std::move(table)), metric_(metric) {
  const std::size_t n = table_.size();
  if (n == 0) throw InvalidArgument("metric space: empty");
  for (std::size_t i = 0; i < n; ++i) {
    if (table_[i].size() != n) throw InvalidArgument("metric space: table is not square");
    if (table_[i][i] != 0.0) throw InvalidArgument("metric space: nonzero diagonal");
    for (std::size_t j = 0; j < n; ++j) {
      const double d = table_[i][j];
      if (!std::isfinite(d) || d < 0.0) throw InvalidArgument("metric space: negative or non-finite distance");
      if (std::abs(d - table_[j][i]) > kSlack * std::max(1.0, d))
        throw InvalidArgument("metric space: asymmetric table");
    }
  }
  if (!metric_) return;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        if (table_[i][k] > (table_[i][j] + table_[j][k]) * (1.0 + 1e-9) + 1e-15)
          throw InvalidArgument("metric space: triangle inequality fails");
}

FiniteMetricSpace FiniteMetricSpace::from_points(const std::vector<double>& points, int dim) {
  if (dim < 1 || points.size() % static_cast<std::size_t>(dim) != 0)
    throw InvalidArgument("metric space: point array does not match dimension");
  const std::size_t n = points.size() / dim;
  return from_callback(n, [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (int k = 0; k < dim; ++k) {
      const double d = points[i * dim + k] - points[j * dim + k];
      s += d * d;
    }
    return std::sqrt(s);
  });
}

FiniteMetricSpace FiniteMetricSpace::from_callback(std::size_t n,
                                                   const std::function<double(std::size_t, std::size_t)>& d,
                                                   bool metric) {
  std::vector<std::vector<double>> t(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) t[i][j] = t[j][i] = d(i, j);
  return FiniteMetricSpace(std::move(t), metric);
}

FiniteMetricSpace FiniteMetricSpace::power(double alpha) const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("metric power: alpha must lie in (0, 1]");
  auto t = table_;
  for (auto& row : t)
    for (double& v : row) v = std::pow(v, alpha);
  return FiniteMetricSpace(std::move(t), metric_);
}

FiniteMetricSpace FiniteMetricSpace::product(const FiniteMetricSpace& x, const FiniteMetricSpace& y) {
  const std::size_t m = y.size();
  std::vector<std::vector<double>> t(x.size() * m, std::vector<double>(x.size() * m));
  for (std::size_t a = 0; a < t.size(); ++a)
    for (std::size_t b = 0; b < t.size(); ++b)
      t[a][b] = std::max(x.table_[a / m][b / m], y.table_[a % m][b % m]);
  return FiniteMetricSpace(std::move(t), x.metric_ && y.metric_);
}

bool is_eps_net(const FiniteMetricSpace& space, const std::vector<std::size_t>& net, double eps) {
  for (std::size_t i = 0; i < space.size(); ++i) {
    bool hit = false;
    for (std::size_t c : net)
      if (within(space.distance(i, c), eps)) {
        hit = true;
        break;
      }
    if (!hit) return false;
  }
  return true;
}

CoverResult covering_number_greedy(const FiniteMetricSpace& space, double eps) {
  if (!(eps > 0.0)) throw InvalidArgument("covering: eps must be positive");
  const std::size_t n = space.size();
  std::vector<double> gap(n, INFINITY);
  CoverResult r;
  std::size_t next = 0;
  for (;;) {
    r.net.push_back(next);
    for (std::size_t i = 0; i < n; ++i) gap[i] = std::min(gap[i], space.distance(i, next));
    const auto far = std::max_element(gap.begin(), gap.end());
    if (within(*far, eps)) break;
    next = static_cast<std::size_t>(far - gap.begin());
  }
  r.count = r.net.size();
  if (!is_eps_net(space, r.net, eps)) throw PreconditionViolation("covering: greedy net failed to cover");
  return r;
}

CoverResult covering_number_exact(const FiniteMetricSpace& space, double eps) {
  if (!(eps > 0.0)) throw InvalidArgument("covering: eps must be positive");
  const std::size_t n = space.size();
  if (n > kMaxExhaustive)
    throw TooLarge("exact covering: " + std::to_string(n) + " points exceed the limit of " +
                   std::to_string(kMaxExhaustive));
  std::vector<std::uint32_t> ball(n, 0);
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t i = 0; i < n; ++i)
      if (within(space.distance(i, c), eps)) ball[c] |= 1u << i;
  const std::uint32_t all = n == 32 ? ~0u : (1u << n) - 1u;

  for (std::size_t k = 1; k <= n; ++k) {
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    for (;;) {
      std::uint32_t cov = 0;
      for (std::size_t c : idx) cov |= ball[c];
      if (cov == all) return {k, idx};
      std::size_t pos = k;
      while (pos > 0 && idx[pos - 1] == n - k + pos - 1) --pos;
      if (pos == 0) break;
      ++idx[pos - 1];
      for (std::size_t j = pos; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
  }
  throw PreconditionViolation("exact covering: no cover found");
}

namespace {

CoverResult best_cover(const FiniteMetricSpace& s, double eps, bool& exact) {
  exact = s.size() <= kMaxExhaustive;
  return exact ? covering_number_exact(s, eps) : covering_number_greedy(s, eps);
}

}  // namespace

ProductReport product_entropy_check(const FiniteMetricSpace& x, const FiniteMetricSpace& y, double eps) {
  ProductReport rep;
  rep.eps = eps;
  bool ex = false;
  const auto cx = best_cover(x, eps, ex);
  const auto cy = best_cover(y, eps, ex);
  rep.entropy_x = std::log(static_cast<double>(cx.count));
  rep.entropy_y = std::log(static_cast<double>(cy.count));

  const auto xy = FiniteMetricSpace::product(x, y);
  std::vector<std::size_t> net;
  for (std::size_t a : cx.net)
    for (std::size_t b : cy.net) net.push_back(a * y.size() + b);
  rep.product_net_size = net.size();
  rep.product_net_valid = is_eps_net(xy, net, eps);

  std::size_t best = net.size();
  if (xy.size() <= 16) {
    best = covering_number_exact(xy, eps).count;
    rep.product_exact = true;
  } else {
    best = std::min(best, covering_number_greedy(xy, eps).count);
  }
  rep.entropy_product = std::log(static_cast<double>(best));
  rep.holds = rep.product_net_valid && rep.entropy_product <= rep.entropy_x + rep.entropy_y + 1e-12;
  return rep;
}

ChangeOfMetricReport change_of_metric_check(const FiniteMetricSpace& space, double alpha, double eps) {
  ChangeOfMetricReport rep;
  rep.alpha = alpha;
  rep.eps = eps;
  const auto powered = space.power(alpha);
  bool ex = false;
  const auto cp = best_cover(powered, eps, ex);
  const auto cb = best_cover(space, std::pow(eps, 1.0 / alpha), ex);
  rep.count_power = cp.count;
  rep.count_base = cb.count;
  rep.base_net_covers_power = is_eps_net(powered, cb.net, eps);
  rep.holds = rep.base_net_covers_power && rep.count_power == rep.count_base;
  return rep;
}

std::vector<double> Lip1Net::nodes() const {
  std::vector<double> x(2 * nodes_per_side + 1);
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = (static_cast<double>(i) - static_cast<double>(nodes_per_side)) * pitch;
  return x;
}

std::vector<double> Lip1Net::snap(const std::function<double(double)>& h) const {
  const std::size_t K = nodes_per_side;
  std::vector<double> v(2 * K + 1, 0.0);
  const double h0 = h(0.0);
  for (int side : {-1, 1}) {
    double cur = 0.0;
    for (std::size_t k = 1; k <= K; ++k) {
      const double x = side * static_cast<double>(k) * pitch;
      const double target = h(x) - h0;
      double best = cur;
      for (double step : {-pitch, 0.0, pitch})
        if (std::abs(cur + step - target) < std::abs(best - target)) best = cur + step;
      cur = best;
      v[K + side * static_cast<std::ptrdiff_t>(k)] = cur;
    }
  }
  return v;
}

std::vector<double> Lip1Net::element(const std::vector<int>& steps) const {
  const std::size_t K = nodes_per_side;
  if (steps.size() != 2 * K) throw InvalidArgument("lip1 net: expected 2K step digits");
  std::vector<double> v(2 * K + 1, 0.0);
  for (std::size_t k = 1; k <= K; ++k) {
    const int up = steps[K + k - 1], dn = steps[k - 1];
    if (up < 0 || up > 2 || dn < 0 || dn > 2) throw InvalidArgument("lip1 net: step digit outside {0,1,2}");
    v[K + k] = v[K + k - 1] + (up - 1) * pitch;
    v[K - k] = v[K - k + 1] + (dn - 1) * pitch;
  }
  return v;
}

double Lip1Net::evaluate(const std::vector<double>& values, double x) const {
  const double t = x / pitch + static_cast<double>(nodes_per_side);
  if (t <= 0.0) return values.front();
  if (t >= static_cast<double>(values.size() - 1)) return values.back();
  const auto i = static_cast<std::size_t>(std::floor(t));
  const double w = t - static_cast<double>(i);
  return i + 1 < values.size() ? (1.0 - w) * values[i] + w * values[i + 1] : values[i];
}

double Lip1Net::weighted_distance(const std::vector<double>& values, const std::function<double(double)>& h,
                                  std::size_t resolution) const {
  if (resolution < 2) throw InvalidArgument("lip1 net: resolution must be at least 2");
  const double h0 = h(0.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < resolution; ++i) {
    const double x = -half_width + 2.0 * half_width * static_cast<double>(i) / static_cast<double>(resolution - 1);
    const double w = std::pow(1.0 + x * x, -0.5 * weight_exponent);
    worst = std::max(worst, w * std::abs(evaluate(values, x) - (h(x) - h0)));
  }
  return worst;
}

Lip1Net lip1_net(double eps, double half_width, double weight_exponent, int dim) {
  if (dim != 1) throw InvalidArgument("lip1 net: only d = 1 is constructed");
  if (!(eps > 0.0) || !(half_width > 0.0)) throw InvalidArgument("lip1 net: eps and half-width must be positive");
  if (!(weight_exponent > 1.0)) throw InvalidArgument("lip1 net: weight exponent must exceed 1");
  Lip1Net net;
  net.eps = eps;
  net.half_width = half_width;
  net.weight_exponent = weight_exponent;
  net.pitch = eps / 2.0;
  net.nodes_per_side = static_cast<std::size_t>(std::ceil(half_width / net.pitch - 1e-12));
  net.half_width = static_cast<double>(net.nodes_per_side) * net.pitch;
  net.log_size = 2.0 * static_cast<double>(net.nodes_per_side) * std::log(3.0);
  net.predicted_exponent = std::max(1.0, dim / (weight_exponent - 1.0));
  return net;
}

Rational to_rational(double x) {
  if (!std::isfinite(x)) throw InvalidArgument("to_rational: non-finite value");
  constexpr std::int64_t kMaxDen = 1000000;
  const bool neg = x < 0.0;
  double r = std::abs(x);
  std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  for (int it = 0; it < 64; ++it) {
    const double a = std::floor(r);
    if (a > 1e12) break;
    const auto ai = static_cast<std::int64_t>(a);
    const std::int64_t q2 = q0 + ai * q1;
    if (q2 > kMaxDen) break;
    const std::int64_t p2 = p0 + ai * p1;
    p0 = p1, q0 = q1, p1 = p2, q1 = q2;
    const double frac = r - a;
    if (frac < 1e-12 || std::abs(static_cast<double>(p1) / static_cast<double>(q1) - std::abs(x)) <
                            1e-15 * std::max(1.0, std::abs(x)))
      break;
    r = 1.0 / frac;
  }
  if (q1 == 0) throw InvalidArgument("to_rational: value too large");
  return Rational(neg ? -p1 : p1, q1);
}

std::string to_string(Rational r) {
  std::ostringstream os;
  os << r.numerator();
  if (r.denominator() != 1) os << '/' << r.denominator();
  return os.str();
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw HypothesisViolation(what);
}

Rational rmax(Rational a, Rational b) { return a < b ? b : a; }

// d / (p - 1) with p > 1 checked by the caller.
Rational moment_term(Rational p, int d) { return Rational(d) / (p - 1); }

// d / q, zero when q is infinite.
Rational over_q(int d, const std::optional<Rational>& q) { return q ? Rational(d) / *q : Rational(0); }

void check_common(Rational p, int d) {
  require(d >= 1, "dimension must be at least 1");
  require(p != Rational(2), "moment exponent p must differ from 2");
}

}  // namespace

Rational gamma_first_order(const GammaCase& c, Rational p, int d) {
  check_common(p, d);
  require(p > Rational(1), "moment exponent p must exceed 1");
  if (const auto* h = std::get_if<HolderCase>(&c)) {
    const Rational a = h->alpha;
    require(a > Rational(0) && a <= Rational(1), "Hölder exponent must lie in (0, 1]");
    return Rational(1) / (Rational(2) + rmax(Rational(d + 2) / (a * a), moment_term(p, d)));
  }
  const auto& s = std::get<SobolevCase>(c);
  require(!s.q || *s.q > Rational(2), "integrability exponent q must exceed 2");
  require(s.s <= Rational(1), "Sobolev smoothness s must be at most 1");
  require(s.s > Rational(2 + d) * (s.q ? Rational(1) / *s.q : Rational(0)),
          "Sobolev smoothness s must exceed (2 + d)/q");
  require(p > over_q(d, s.q), "moment exponent p must exceed d/q");
  return Rational(1) / (Rational(2) + rmax(Rational(d + 2) / (s.s * s.s), moment_term(p, d)));
}

Rational gamma_second_order(const GammaCase& c, Rational p, int d) {
  check_common(p, d);
  if (const auto* h = std::get_if<HolderCase>(&c)) {
    const Rational a = h->alpha;
    require(p > Rational(1), "moment exponent p must exceed 1");
    require(a > Rational(2, 3) && a <= Rational(1), "second order needs a Hölder exponent greater than 2/3 (and at most 1)");
    return Rational(1) / (Rational(2) + rmax(Rational(d + 1) / (a * a), moment_term(p, d)));
  }
  const auto& s = std::get<SobolevCase>(c);
  require(!s.q || *s.q > Rational(2), "integrability exponent q must exceed 2");
  require(!s.q || *s.q * s.s > Rational(d + 1), "integrability exponent q must exceed (d + 1)/s");
  require(s.s <= Rational(3, 2), "Sobolev smoothness s must be at most 3/2");
  require(s.s > Rational(2, 3) + over_q(d, s.q), "Sobolev smoothness s must exceed 2/3 + d/q");
  require(p > over_q(d, s.q), "moment exponent p must exceed d/q");
  require(p > Rational(2), "moment exponent p must exceed 2");
  if (s.s <= Rational(1)) return Rational(1) / (Rational(2) + Rational(d + 1) / (s.s * s.s));
  return Rational(1) / (Rational(2) + rmax(Rational(d + 1) / s.s, Rational(d)));
}

}  // namespace chaoslab::covering
