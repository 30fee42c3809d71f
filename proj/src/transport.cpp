#include "chaoslab/transport.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <numeric>

#include "chaoslab/errors.hpp"

namespace chaoslab::transport {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/**
 * Primal network simplex for the dense bipartite transportation problem.
 *
 * Spanning-tree basis rooted at an artificial node joined to every supply and
 * demand node by a big-M arc. Entering arcs come from block-search pricing;
 * the leaving-arc tie rule keeps the tree strongly feasible, which rules out
 * cycling on the (very common) degenerate pivots. Tree structure is kept as
 * parent/pred/depth plus intrusive child lists, and a pivot re-hangs the
 * detached subtree and shifts its potentials by a walk over that subtree.
 */
class NetworkSimplex {
 public:
  NetworkSimplex(std::span<const double> supply, std::span<const double> demand, std::span<const double> cost)
      : m_(supply.size()), n_(demand.size()), cost_(cost) {
    nodes_ = m_ + n_ + 1;
    root_ = m_ + n_;
    real_arcs_ = m_ * n_;
    arcs_ = real_arcs_ + m_ + n_;
    double max_cost = 0.0;
    for (double c : cost_) max_cost = std::max(max_cost, std::abs(c));
    art_cost_ = (max_cost + 1.0) * static_cast<double>(nodes_);
    eps_ = 64.0 * DBL_EPSILON * art_cost_;

    flow_.assign(arcs_, 0.0);
    tree_.assign(arcs_, 0);
    pi_.assign(nodes_, 0.0);
    parent_.assign(nodes_, npos);
    pred_.assign(nodes_, npos);
    dir_.assign(nodes_, 0);
    depth_.assign(nodes_, 0);
    first_child_.assign(nodes_, npos);
    next_.assign(nodes_, npos);
    prev_.assign(nodes_, npos);

    art_up_.assign(m_ + n_, 0);
    for (std::size_t k = 0; k < m_ + n_; ++k) {
      const double s = k < m_ ? supply[k] : -demand[k - m_];
      art_up_[k] = s > 0.0 ? 1 : 0;
      const std::size_t a = real_arcs_ + k;
      flow_[a] = std::abs(s);
      tree_[a] = 1;
      parent_[k] = root_;
      pred_[k] = a;
      depth_[k] = 1;
      // supply nodes hang on an upward arc, everything else on a downward one
      dir_[k] = s > 0.0 ? 1 : -1;
      pi_[k] = s > 0.0 ? -art_cost_ : art_cost_;
      add_child(root_, k);
    }
    block_ = std::max<std::size_t>(10, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(arcs_)))));
  }

  void run() {
    std::size_t in_arc = 0;
    while (find_entering(in_arc)) pivot(in_arc);
    for (std::size_t k = 0; k < m_ + n_; ++k) {
      if (flow_[real_arcs_ + k] > 1e-9) throw std::logic_error("network simplex: artificial flow left in the basis");
    }
  }

  double objective() const {
    double s = 0.0;
    for (std::size_t a = 0; a < real_arcs_; ++a) {
      if (flow_[a] > 0.0) s += flow_[a] * cost_[a];
    }
    return s;
  }

  TransportResult result() const {
    TransportResult r;
    r.method = "network_simplex";
    r.value = objective();
    for (std::size_t a = 0; a < real_arcs_; ++a) {
      if (flow_[a] > 0.0) r.plan.push_back({a / n_, a % n_, flow_[a]});
    }
    // potentials recomputed from the final tree so tree arcs are exactly tight
    std::vector<double> pi(nodes_, 0.0);
    std::vector<std::size_t> stack{root_};
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t c = first_child_[u]; c != npos; c = next_[c]) {
        pi[c] = pi[u] - dir_[c] * arc_cost(pred_[c]);
        stack.push_back(c);
      }
    }
    r.source_potential.resize(m_);
    r.target_potential.resize(n_);
    const double shift = m_ > 0 ? pi[0] : 0.0;
    for (std::size_t i = 0; i < m_; ++i) r.source_potential[i] = -(pi[i] - shift);
    for (std::size_t j = 0; j < n_; ++j) r.target_potential[j] = pi[m_ + j] - shift;
    return r;
  }

 private:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  std::size_t src(std::size_t a) const noexcept {
    if (a < real_arcs_) return a / n_;
    const std::size_t k = a - real_arcs_;
    return dir_init_up(k) ? k : root_;
  }
  std::size_t tgt(std::size_t a) const noexcept {
    if (a < real_arcs_) return m_ + a % n_;
    const std::size_t k = a - real_arcs_;
    return dir_init_up(k) ? root_ : k;
  }
  bool dir_init_up(std::size_t k) const noexcept { return art_up_[k] != 0; }
  double arc_cost(std::size_t a) const noexcept { return a < real_arcs_ ? cost_[a] : art_cost_; }

  void add_child(std::size_t p, std::size_t c) {
    prev_[c] = npos;
    next_[c] = first_child_[p];
    if (first_child_[p] != npos) prev_[first_child_[p]] = c;
    first_child_[p] = c;
  }

  void remove_child(std::size_t p, std::size_t c) {
    if (prev_[c] != npos) {
      next_[prev_[c]] = next_[c];
    } else {
      first_child_[p] = next_[c];
    }
    if (next_[c] != npos) prev_[next_[c]] = prev_[c];
    prev_[c] = next_[c] = npos;
  }

  double reduced_cost(std::size_t a) const noexcept { return arc_cost(a) + pi_[src(a)] - pi_[tgt(a)]; }

  bool find_entering(std::size_t& in_arc) {
    double best = 0.0;
    std::size_t count = block_;
    std::size_t e = next_arc_;
    for (std::size_t scanned = 0; scanned < arcs_; ++scanned) {
      if (!tree_[e]) {
        const double c = reduced_cost(e);
        if (c < best) {
          best = c;
          in_arc = e;
        }
      }
      ++e;
      if (e == arcs_) e = 0;
      if (--count == 0) {
        if (best < -eps_) {
          next_arc_ = e;
          return true;
        }
        count = block_;
      }
    }
    if (best < -eps_) {
      next_arc_ = e;
      return true;
    }
    return false;
  }

  std::size_t find_join(std::size_t u, std::size_t v) const {
    while (u != v) {
      if (depth_[u] > depth_[v]) {
        u = parent_[u];
      } else if (depth_[v] > depth_[u]) {
        v = parent_[v];
      } else {
        u = parent_[u];
        v = parent_[v];
      }
    }
    return u;
  }

  void pivot(std::size_t in_arc) {
    const std::size_t first = src(in_arc);
    const std::size_t second = tgt(in_arc);
    const std::size_t join = find_join(first, second);

    double delta = kInf;
    std::size_t u_out = npos;
    int side = 0;
    for (std::size_t u = first; u != join; u = parent_[u]) {
      const double d = dir_[u] > 0 ? flow_[pred_[u]] : kInf;
      if (d < delta) {
        delta = d;
        u_out = u;
        side = 1;
      }
    }
    for (std::size_t u = second; u != join; u = parent_[u]) {
      const double d = dir_[u] < 0 ? flow_[pred_[u]] : kInf;
      if (d <= delta) {
        delta = d;
        u_out = u;
        side = 2;
      }
    }
    if (side == 0 || delta == kInf) throw std::logic_error("network simplex: unbounded cycle");

    const std::size_t out_arc = pred_[u_out];
    if (delta > 0.0) {
      flow_[in_arc] += delta;
      for (std::size_t u = first; u != join; u = parent_[u]) flow_[pred_[u]] -= dir_[u] * delta;
      for (std::size_t u = second; u != join; u = parent_[u]) flow_[pred_[u]] += dir_[u] * delta;
    }
    flow_[out_arc] = 0.0;
    tree_[in_arc] = 1;
    tree_[out_arc] = 0;

    const std::size_t u_in = side == 1 ? first : second;
    const std::size_t v_in = side == 1 ? second : first;

    path_.clear();
    for (std::size_t w = u_in;; w = parent_[w]) {
      path_.push_back(w);
      if (w == u_out) break;
    }
    old_pred_.resize(path_.size());
    old_dir_.resize(path_.size());
    for (std::size_t i = 0; i < path_.size(); ++i) {
      old_pred_[i] = pred_[path_[i]];
      old_dir_[i] = dir_[path_[i]];
      remove_child(parent_[path_[i]], path_[i]);
    }
    parent_[u_in] = v_in;
    pred_[u_in] = in_arc;
    dir_[u_in] = src(in_arc) == u_in ? 1 : -1;
    add_child(v_in, u_in);
    for (std::size_t i = 0; i + 1 < path_.size(); ++i) {
      const std::size_t w = path_[i + 1];
      parent_[w] = path_[i];
      pred_[w] = old_pred_[i];
      dir_[w] = -old_dir_[i];
      add_child(path_[i], w);
    }

    const double sigma = pi_[v_in] - pi_[u_in] - dir_[u_in] * arc_cost(in_arc);
    stack_.clear();
    stack_.push_back(u_in);
    depth_[u_in] = depth_[v_in] + 1;
    while (!stack_.empty()) {
      const std::size_t u = stack_.back();
      stack_.pop_back();
      pi_[u] += sigma;
      for (std::size_t c = first_child_[u]; c != npos; c = next_[c]) {
        depth_[c] = depth_[u] + 1;
        stack_.push_back(c);
      }
    }
  }

  std::size_t m_, n_;
  std::span<const double> cost_;
  std::size_t nodes_ = 0, root_ = 0, real_arcs_ = 0, arcs_ = 0, block_ = 10, next_arc_ = 0;
  double art_cost_ = 1.0, eps_ = 0.0;
  std::vector<double> flow_;
  std::vector<unsigned char> tree_;
  std::vector<double> pi_;
  std::vector<std::size_t> parent_, pred_, depth_, first_child_, next_, prev_;
  std::vector<int> dir_;
  std::vector<unsigned char> art_up_;
  std::vector<std::size_t> path_, old_pred_, stack_;
  std::vector<int> old_dir_;
};

/// Right-continuous CDF of atoms plus a piecewise-constant density on cells.
class Cdf1D {
 public:
  void add_atoms(std::span<const double> xs, std::span<const double> ws) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    atom_x_.clear();
    atom_cum_.clear();
    double s = 0.0;
    for (std::size_t k : order) {
      s += ws[k];
      if (!atom_x_.empty() && atom_x_.back() == xs[k]) {
        atom_cum_.back() = s;
      } else {
        atom_x_.push_back(xs[k]);
        atom_cum_.push_back(s);
      }
    }
  }

  void set_cells(double left, double width, std::span<const double> masses) {
    edges_.resize(masses.size() + 1);
    for (std::size_t i = 0; i <= masses.size(); ++i) edges_[i] = left + static_cast<double>(i) * width;
    cell_mass_.assign(masses.begin(), masses.end());
    cell_cum_.resize(masses.size() + 1);
    cell_cum_[0] = 0.0;
    for (std::size_t i = 0; i < masses.size(); ++i) cell_cum_[i + 1] = cell_cum_[i] + masses[i];
  }

  void breakpoints(std::vector<double>& out) const {
    out.insert(out.end(), atom_x_.begin(), atom_x_.end());
    out.insert(out.end(), edges_.begin(), edges_.end());
  }

  /// F(x) and F(x-).
  std::pair<double, double> at(double x) const {
    double right = 0.0, left = 0.0;
    if (!atom_x_.empty()) {
      const auto up = std::upper_bound(atom_x_.begin(), atom_x_.end(), x);
      const auto k = static_cast<std::size_t>(up - atom_x_.begin());
      right = k == 0 ? 0.0 : atom_cum_[k - 1];
      left = right;
      if (k > 0 && atom_x_[k - 1] == x) left = k >= 2 ? atom_cum_[k - 2] : 0.0;
    }
    if (!cell_mass_.empty()) {
      double c = 0.0;
      if (x >= edges_.back()) {
        c = cell_cum_.back();
      } else if (x > edges_.front()) {
        const auto up = std::upper_bound(edges_.begin(), edges_.end(), x);
        const auto k = static_cast<std::size_t>(up - edges_.begin()) - 1;
        c = cell_cum_[k] + cell_mass_[k] * (x - edges_[k]) / (edges_[k + 1] - edges_[k]);
      }
      right += c;
      left += c;
    }
    return {right, left};
  }

 private:
  std::vector<double> atom_x_, atom_cum_;
  std::vector<double> edges_, cell_mass_, cell_cum_;
};

double integrate_cdf_gap(const Cdf1D& a, const Cdf1D& b) {
  std::vector<double> pts;
  a.breakpoints(pts);
  b.breakpoints(pts);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const double p = pts[k];
    const double q = pts[k + 1];
    const double l = a.at(p).first - b.at(p).first;
    const double r = a.at(q).second - b.at(q).second;
    const double len = q - p;
    if ((l >= 0.0 && r >= 0.0) || (l <= 0.0 && r <= 0.0)) {
      total += 0.5 * (std::abs(l) + std::abs(r)) * len;
    } else {
      total += 0.5 * (l * l + r * r) / (std::abs(l) + std::abs(r)) * len;
    }
  }
  return total;
}

Cdf1D cdf_of(const DiscreteMeasure& mu) {
  if (mu.dim != 1) throw InvalidArgument("w1_1d: measure must be one-dimensional");
  Cdf1D c;
  c.add_atoms(mu.atoms, mu.weights);
  return c;
}

Cdf1D cdf_of(const GridDensity& f) {
  if (f.dim != 1) throw InvalidArgument("w1_1d: density must be one-dimensional");
  const double total = f.total_mass();
  if (std::abs(total - 1.0) > 1e-8) throw PreconditionViolation("w1_1d: density mass is not 1");
  Cdf1D c;
  c.set_cells(-f.half_width, f.cell_width(), f.mass);
  return c;
}

void validate_measure(const DiscreteMeasure& mu) {
  if (mu.dim < 1 || mu.dim > 2 * kMaxDim) throw InvalidArgument("measure dimension out of range");
  if (mu.weights.empty()) throw InvalidArgument("measure needs at least one atom");
  if (mu.atoms.size() != mu.weights.size() * static_cast<std::size_t>(mu.dim)) {
    throw InvalidArgument("measure atoms and weights disagree in length");
  }
  double s = 0.0;
  for (double w : mu.weights) {
    if (!(w >= 0.0)) throw InvalidArgument("measure weights must be non-negative");
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-12) throw InvalidArgument("measure weights must sum to 1");
  for (double a : mu.atoms) {
    if (!std::isfinite(a)) throw InvalidArgument("measure atoms must be finite");
  }
}

double euclid(const DiscreteMeasure& mu, std::size_t i, const DiscreteMeasure& nu, std::size_t j) {
  double s = 0.0;
  const auto d = static_cast<std::size_t>(mu.dim);
  for (std::size_t k = 0; k < d; ++k) {
    const double z = mu.atoms[i * d + k] - nu.atoms[j * d + k];
    s += z * z;
  }
  return std::sqrt(s);
}

TransportResult transport_between(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double cap) {
  validate_measure(mu);
  validate_measure(nu);
  if (mu.dim != nu.dim) throw InvalidArgument("measures live in different dimensions");
  const std::size_t m = mu.size(), n = nu.size();
  if (m * n > kMaxTransportArcs) {
    throw TooLarge("transport instance with " + std::to_string(m) + " x " + std::to_string(n) +
                   " atoms exceeds the exact-solver guard; subsample the measures");
  }
  std::vector<double> cost(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = std::min(euclid(mu, i, nu, j), cap);
  }
  return solve_transport(mu.weights, nu.weights, cost);
}

}  // namespace

DiscreteMeasure make_measure(int dim, std::vector<double> atoms, std::vector<double> weights) {
  DiscreteMeasure mu{dim, std::move(atoms), std::move(weights)};
  validate_measure(mu);
  return mu;
}

DiscreteMeasure uniform_measure(int dim, std::vector<double> atoms) {
  if (dim < 1) throw InvalidArgument("measure dimension out of range");
  const std::size_t n = atoms.size() / static_cast<std::size_t>(dim);
  if (n == 0) throw InvalidArgument("measure needs at least one atom");
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  DiscreteMeasure mu{dim, std::move(atoms), std::move(w)};
  if (mu.atoms.size() != n * static_cast<std::size_t>(dim)) throw InvalidArgument("atom array not a multiple of dim");
  return mu;
}

TransportResult solve_transport(std::span<const double> supply, std::span<const double> demand,
                                std::span<const double> cost) {
  const std::size_t m = supply.size(), n = demand.size();
  if (m == 0 || n == 0) throw InvalidArgument("transport needs non-empty marginals");
  if (cost.size() != m * n) throw InvalidArgument("cost matrix shape does not match the marginals");
  if (m * n > kMaxTransportArcs) throw TooLarge("transport instance exceeds the exact-solver guard");
  double sa = 0.0, sb = 0.0;
  for (double a : supply) sa += a;
  for (double b : demand) sb += b;
  if (std::abs(sa - sb) > 1e-9 * std::max(1.0, sa)) throw PreconditionViolation("transport marginals are unbalanced");
  // absorb rounding in the largest demand so the network is exactly balanced
  std::vector<double> dem(demand.begin(), demand.end());
  const auto big = static_cast<std::size_t>(std::max_element(dem.begin(), dem.end()) - dem.begin());
  dem[big] += sa - sb;
  NetworkSimplex ns(supply, dem, cost);
  ns.run();
  return ns.result();
}

DiscreteMeasure empirical_measure(const particles::TrajectoryBundle& bundle, std::size_t step) {
  if (step >= bundle.positions.size()) throw InvalidArgument("empirical_measure: step out of range");
  if (bundle.order == particles::Order::first) return uniform_measure(bundle.dim, bundle.positions[step]);
  const auto d = static_cast<std::size_t>(bundle.dim);
  std::vector<double> pts(bundle.n * 2 * d);
  for (std::size_t i = 0; i < bundle.n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      pts[i * 2 * d + k] = bundle.positions[step][i * d + k];
      pts[i * 2 * d + d + k] = bundle.velocities[step][i * d + k];
    }
  }
  return uniform_measure(2 * bundle.dim, std::move(pts));
}

double w1_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  validate_measure(mu);
  validate_measure(nu);
  return integrate_cdf_gap(cdf_of(mu), cdf_of(nu));
}

double w1_1d(const DiscreteMeasure& mu, const GridDensity& density) {
  validate_measure(mu);
  return integrate_cdf_gap(cdf_of(mu), cdf_of(density));
}

double w1_1d(const GridDensity& f, const GridDensity& g) { return integrate_cdf_gap(cdf_of(f), cdf_of(g)); }

TransportResult w1_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  return transport_between(mu, nu, kInf);
}

double dbl(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (mu.size() + nu.size() > kMaxBlAtoms) {
    throw TooLarge("d_BL support of " + std::to_string(mu.size() + nu.size()) + " atoms exceeds the guard");
  }
  return transport_between(mu, nu, 2.0).value;
}

namespace {

DiscreteMeasure cells_to_measure(int dim, const std::vector<double>& mass, const std::vector<int>& shape,
                                 const std::vector<double>& lower, const std::vector<double>& width,
                                 std::size_t atom_budget, AtomMode mode, double drop) {
  int factor = 1;
  for (;;) {
    std::vector<int> blocks(shape.size());
    std::size_t block_count = 1;
    for (std::size_t a = 0; a < shape.size(); ++a) {
      blocks[a] = (shape[a] + factor - 1) / factor;
      block_count *= static_cast<std::size_t>(blocks[a]);
    }
    std::vector<double> agg(block_count, 0.0);
    for (std::size_t c = 0; c < mass.size(); ++c) {
      std::size_t rem = c, b = 0, stride = 1;
      std::vector<int> idx(shape.size());
      for (std::size_t a = shape.size(); a-- > 0;) {
        idx[a] = static_cast<int>(rem % static_cast<std::size_t>(shape[a]));
        rem /= static_cast<std::size_t>(shape[a]);
      }
      for (std::size_t a = shape.size(); a-- > 0;) {
        b += static_cast<std::size_t>(idx[a] / factor) * stride;
        stride *= static_cast<std::size_t>(blocks[a]);
      }
      agg[b] += mass[c];
    }
    std::size_t kept = 0;
    for (double v : agg) kept += v > drop ? 1 : 0;
    if (kept <= atom_budget || (factor > 1 && block_count == 1)) {
      if (kept == 0) throw PreconditionViolation("grid_to_measure: density has no mass");
      std::vector<double> atoms, weights;
      double total = 0.0;
      for (std::size_t b = 0; b < block_count; ++b) {
        if (!(agg[b] > drop)) continue;
        std::size_t rem = b;
        std::vector<double> p(shape.size());
        for (std::size_t a = shape.size(); a-- > 0;) {
          const int i = static_cast<int>(rem % static_cast<std::size_t>(blocks[a]));
          rem /= static_cast<std::size_t>(blocks[a]);
          const int lo = i * factor;
          const int hi = std::min(lo + factor, shape[a]);
          p[a] = lower[a] + 0.5 * (lo + hi) * width[a];
        }
        atoms.insert(atoms.end(), p.begin(), p.end());
        weights.push_back(agg[b]);
        total += agg[b];
      }
      for (double& w : weights) w /= total;
      // exact renormalisation: push the rounding residue into the largest weight
      double s = 0.0;
      for (double w : weights) s += w;
      *std::max_element(weights.begin(), weights.end()) += 1.0 - s;
      return DiscreteMeasure{dim, std::move(atoms), std::move(weights)};
    }
    if (mode == AtomMode::strict) {
      throw TooLarge("grid_to_measure: " + std::to_string(kept) + " cells exceed the atom budget of " +
                     std::to_string(atom_budget));
    }
    factor *= 2;
  }
}

}  // namespace

DiscreteMeasure grid_to_measure(const GridDensity& density, std::size_t atom_budget, AtomMode mode,
                                double drop_threshold) {
  std::vector<int> shape(static_cast<std::size_t>(density.dim), density.cells_per_axis);
  std::vector<double> lower(shape.size(), -density.half_width);
  std::vector<double> width(shape.size(), density.cell_width());
  return cells_to_measure(density.dim, density.mass, shape, lower, width, atom_budget, mode, drop_threshold);
}

DiscreteMeasure grid_to_measure(const PhaseGridDensity& density, std::size_t atom_budget, AtomMode mode,
                                double drop_threshold) {
  return cells_to_measure(2, density.mass, {density.cells_x, density.cells_v},
                          {-density.half_width_x, -density.half_width_v}, {density.dx(), density.dv()}, atom_budget,
                          mode, drop_threshold);
}

namespace {

std::vector<std::size_t> evaluated_steps(std::size_t count, std::size_t stride) {
  if (stride == 0) throw InvalidArgument("time stride must be positive");
  std::vector<std::size_t> s;
  for (std::size_t k = 0; k < count; k += stride) s.push_back(k);
  if (s.back() != count - 1) s.push_back(count - 1);
  return s;
}

SupStatistic finish(SupStatistic st, double c, bool positive_part) {
  st.initial = st.distances.front();
  const double sup = *std::max_element(st.distances.begin(), st.distances.end());
  st.value = sup - c * st.initial;
  if (positive_part) st.value = std::max(0.0, st.value);
  return st;
}

}  // namespace

SupStatistic compensated_sup_statistic(const particles::TrajectoryBundle& bundle,
                                       const std::vector<GridDensity>& pde_path, double c, std::size_t atom_budget,
                                       std::size_t time_stride) {
  if (bundle.order != particles::Order::first) {
    throw InvalidArgument("first-order statistic needs a first-order bundle");
  }
  if (pde_path.size() != bundle.positions.size()) throw InvalidArgument("statistic: time grids differ in length");
  for (std::size_t k = 0; k < pde_path.size(); ++k) {
    if (std::abs(pde_path[k].time - bundle.times[k]) > 1e-9 * std::max(1.0, bundle.times[k])) {
      throw InvalidArgument("statistic: time grids do not match");
    }
  }
  SupStatistic st;
  st.steps = evaluated_steps(pde_path.size(), time_stride);
  for (std::size_t k : st.steps) {
    const auto mu = empirical_measure(bundle, k);
    if (bundle.dim == 1) {
      st.distances.push_back(w1_1d(mu, pde_path[k]));
    } else {
      const auto nu = grid_to_measure(pde_path[k], atom_budget, AtomMode::coarsen);
      st.distances.push_back(w1_exact(mu, nu).value);
      st.discretisation_bias = std::max(st.discretisation_bias, pde_path[k].cell_width() / std::sqrt(2.0));
    }
  }
  return finish(std::move(st), c, false);
}

SupStatistic compensated_sup_statistic(const particles::TrajectoryBundle& bundle,
                                       const std::vector<PhaseGridDensity>& pde_path, double c,
                                       std::size_t atom_budget, std::size_t time_stride) {
  if (bundle.order != particles::Order::second || bundle.dim != 1) {
    throw InvalidArgument("phase-space statistic needs a second-order d = 1 bundle");
  }
  if (pde_path.size() != bundle.positions.size()) throw InvalidArgument("statistic: time grids differ in length");
  SupStatistic st;
  st.steps = evaluated_steps(pde_path.size(), time_stride);
  for (std::size_t k : st.steps) {
    if (std::abs(pde_path[k].time - bundle.times[k]) > 1e-9 * std::max(1.0, bundle.times[k])) {
      throw InvalidArgument("statistic: time grids do not match");
    }
    const auto mu = empirical_measure(bundle, k);
    const auto nu = grid_to_measure(pde_path[k], atom_budget, AtomMode::coarsen);
    st.distances.push_back(w1_exact(mu, nu).value);
    st.discretisation_bias =
        std::max(st.discretisation_bias, 0.5 * std::hypot(pde_path[k].dx(), pde_path[k].dv()));
  }
  return finish(std::move(st), c, true);
}

double subgaussian_norm_estimate(std::span<const double> samples) {
  if (samples.size() < 16) throw InvalidArgument("sub-Gaussian estimate needs at least 16 samples");
  double best = 0.0;
  for (int p : {1, 2, 4, 8, 16}) {
    double s = 0.0;
    for (double x : samples) s += std::pow(std::abs(x), p);
    const double norm_p = std::pow(s / static_cast<double>(samples.size()), 1.0 / p);
    best = std::max(best, norm_p / std::sqrt(static_cast<double>(p)));
  }
  return best;
}

}  // namespace chaoslab::transport
