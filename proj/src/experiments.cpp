#include "chaoslab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "chaoslab/errors.hpp"
#include "chaoslab/rng.hpp"
#include "chaoslab/transport.hpp"

namespace chaoslab::experiments {

using particles::Order;
using particles::SimConfig;

void run_tasks(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& task) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::uint64_t subrun_seed(std::uint64_t master, std::size_t n, std::size_t replicate) {
  return rng::derive_seed(master, 0x5EED, n, replicate);
}

LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("log-log fit needs at least two points");
  double mx = 0.0, my = 0.0;
  const auto n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidArgument("log-log fit needs positive data");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw InvalidArgument("log-log fit needs distinct abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

void check_n_list(const std::vector<std::size_t>& n_list, std::size_t minimum) {
  if (n_list.size() < minimum) {
    throw InvalidArgument("N list needs at least " + std::to_string(minimum) + " entries");
  }
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    if (n_list[i] == 0) throw InvalidArgument("N list entries must be positive");
    if (i > 0 && n_list[i] <= n_list[i - 1]) throw InvalidArgument("N list must be strictly increasing");
  }
}

PhaseGridDensity phase_initial(const particles::F0Spec& f0, const particles::F0Spec& velocity,
                               const PhaseGridSpec& g, double kappa) {
  const auto fx = f0.density_on_grid(1, g.half_width_x, g.cells_x);
  const auto fv = velocity.density_on_grid(1, g.half_width_v, g.cells_v);
  PhaseGridDensity p(g.half_width_x, g.half_width_v, g.cells_x, g.cells_v, kappa);
  for (int i = 0; i < g.cells_x; ++i)
    for (int j = 0; j < g.cells_v; ++j)
      p.mass[static_cast<std::size_t>(i) * g.cells_v + j] = fx.mass[i] * fv.mass[j];
  return p;
}

SimConfig sim_config(Order order, std::size_t n, double horizon, double dt, double kappa,
                     const particles::F0Spec& f0, const particles::F0Spec& velocity, std::uint64_t seed,
                     bool self_interaction = true) {
  SimConfig c;
  c.order = order;
  c.n = n;
  c.dim = 1;
  c.horizon = horizon;
  c.dt = dt;
  c.kappa = kappa;
  c.initial = f0;
  c.velocity = velocity;
  c.seed = seed;
  c.self_interaction = self_interaction;
  return c;
}

// Either PDE path flavour, computed once and shared read-only across sub-runs.
struct PdeReference {
  std::vector<GridDensity> first;
  std::vector<PhaseGridDensity> second;

  transport::SupStatistic statistic(const particles::TrajectoryBundle& b, double c, std::size_t budget,
                                    std::size_t stride) const {
    if (b.order == Order::first) return transport::compensated_sup_statistic(b, first, c, budget, stride);
    return transport::compensated_sup_statistic(b, second, c, budget, stride);
  }
};

std::vector<RateAggregate> aggregate(const std::vector<std::size_t>& n_list,
                                     const std::function<std::vector<double>(std::size_t)>& values_for) {
  std::vector<RateAggregate> out;
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    RateAggregate a;
    a.n = n_list[i];
    const auto v = values_for(i);
    a.completed = v.size();
    if (v.empty()) {
      a.mean = a.std_error = a.subgaussian = std::nan("");
    } else {
      a.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - a.mean) * (x - a.mean);
      a.std_error = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()))
                                 : 0.0;
      a.subgaussian = v.size() >= 16 ? transport::subgaussian_norm_estimate(v) : std::nan("");
    }
    out.push_back(a);
  }
  return out;
}

bool strictly_decreasing(const std::vector<RateAggregate>& a) {
  for (std::size_t i = 1; i < a.size(); ++i) {
    if (!(a[i].mean < a[i - 1].mean)) return false;
  }
  return !a.empty();
}

// Fit over the N values whose mean is positive and finite; NaN slope when fewer than two remain.
LineFit fit_means(const std::vector<RateAggregate>& a) {
  std::vector<double> x, y;
  for (const auto& r : a) {
    if (std::isfinite(r.mean) && r.mean > 0.0) {
      x.push_back(static_cast<double>(r.n));
      y.push_back(r.mean);
    }
  }
  if (x.size() < 2) return {std::nan(""), std::nan("")};
  return fit_loglog(x, y);
}

}  // namespace

// ---------------------------------------------------------------- chaos rate

RateReport run_chaos_rate(const RateConfig& cfg) {
  check_n_list(cfg.n_list, 4);
  if (cfg.seeds == 0) throw InvalidArgument("chaos rate needs at least one seed per N");
  if (cfg.kernel.dim() != 1) throw InvalidArgument("chaos rate runs in d = 1");
  cfg.f0.validate();
  if (cfg.order == Order::second) cfg.velocity.validate();

  RateReport rep;
  if (cfg.gamma_case) {
    const auto p = covering::to_rational(cfg.moment_p);
    const auto g = cfg.order == Order::first ? covering::gamma_first_order(*cfg.gamma_case, p, 1)
                                             : covering::gamma_second_order(*cfg.gamma_case, p, 1);
    rep.gamma_theory = boost::rational_cast<double>(g);
    rep.gamma_text = covering::to_string(g);
  }

  const std::size_t steps = sim_config(cfg.order, 1, cfg.horizon, cfg.dt, cfg.kappa, cfg.f0, cfg.velocity, 0).steps();
  auto reference = [&](double dt, std::size_t nsteps) {
    PdeReference r;
    if (cfg.order == Order::first) {
      r.first = pde::evolve_mckean_path(cfg.f0.density_on_grid(1, cfg.grid.half_width, cfg.grid.cells), cfg.kernel,
                                        dt, nsteps)
                    .densities;
    } else {
      r.second = pde::evolve_kinetic_path(phase_initial(cfg.f0, cfg.velocity, cfg.phase_grid, cfg.kappa),
                                          cfg.kernel, dt, nsteps);
    }
    return r;
  };
  const PdeReference base = reference(cfg.dt, steps);

  auto run_cell = [&](RateCell& cell, const PdeReference& ref, std::size_t stride) {
    const auto start = std::chrono::steady_clock::now();
    const auto sc = sim_config(cfg.order, cell.n, cfg.horizon, cell.dt, cfg.kappa, cfg.f0, cfg.velocity, cell.seed,
                               cfg.self_interaction);
    try {
      const auto noise = particles::make_noise(sc);
      const auto bundle = particles::simulate_interacting(sc, cfg.kernel, noise);
      const auto st = ref.statistic(bundle, cfg.c, cfg.atom_budget, stride);
      cell.statistic = st.value;
      cell.initial = st.initial;
    } catch (const SimulationDiverged& e) {
      cell.failed = true;
      cell.failure = e.what();
      cell.statistic = cell.initial = std::nan("");
    }
    cell.wallclock_ms = elapsed_ms(start);
  };

  rep.cells.resize(cfg.n_list.size() * cfg.seeds);
  for (std::size_t i = 0; i < cfg.n_list.size(); ++i) {
    for (std::size_t s = 0; s < cfg.seeds; ++s) {
      auto& c = rep.cells[i * cfg.seeds + s];
      c.n = cfg.n_list[i];
      c.replicate = s;
      c.seed = subrun_seed(cfg.master_seed, c.n, s);
      c.dt = cfg.dt;
    }
  }
  run_tasks(rep.cells.size(), cfg.jobs, [&](std::size_t k) { run_cell(rep.cells[k], base, cfg.time_stride); });

  auto completed = [&](std::size_t i) {
    std::vector<double> v;
    for (std::size_t s = 0; s < cfg.seeds; ++s) {
      const auto& c = rep.cells[i * cfg.seeds + s];
      if (!c.failed) v.push_back(c.statistic);
    }
    return v;
  };
  rep.aggregates = aggregate(cfg.n_list, completed);
  rep.fit = fit_means(rep.aggregates);
  rep.monotone = strictly_decreasing(rep.aggregates);

  if (cfg.bootstrap > 0) {
    std::vector<double> slopes;
    for (std::size_t b = 0; b < cfg.bootstrap; ++b) {
      rng::Stream gen(rng::derive_seed(cfg.master_seed, 0xB007, b), 0);
      std::vector<RateAggregate> res;
      for (std::size_t i = 0; i < cfg.n_list.size(); ++i) {
        const auto v = completed(i);
        RateAggregate a;
        a.n = cfg.n_list[i];
        if (v.empty()) {
          a.mean = std::nan("");
        } else {
          double s = 0.0;
          for (std::size_t k = 0; k < v.size(); ++k) {
            s += v[std::min(v.size() - 1, static_cast<std::size_t>(gen.uniform() * static_cast<double>(v.size())))];
          }
          a.mean = s / static_cast<double>(v.size());
        }
        res.push_back(a);
      }
      const auto f = fit_means(res);
      if (std::isfinite(f.slope)) slopes.push_back(f.slope);
    }
    if (!slopes.empty()) {
      std::sort(slopes.begin(), slopes.end());
      auto q = [&](double p) {
        return slopes[std::min(slopes.size() - 1, static_cast<std::size_t>(p * static_cast<double>(slopes.size())))];
      };
      rep.slope_lo = q(0.025);
      rep.slope_hi = q(0.975);
    }
  }

  if (rep.gamma_theory && std::isfinite(rep.aggregates.front().mean)) {
    const double g = *rep.gamma_theory;
    const double n0 = static_cast<double>(rep.aggregates.front().n);
    rep.envelope_constant = rep.aggregates.front().mean * std::pow(n0, g);
    rep.envelope_holds = true;
    for (const auto& a : rep.aggregates) {
      const double bound = rep.envelope_constant * std::pow(static_cast<double>(a.n), -g);
      if (!(a.mean <= bound * (1.0 + 1e-12))) rep.envelope_holds = false;
    }
  }

  if (cfg.halving_seeds > 0) {
    const std::size_t hs = std::min(cfg.halving_seeds, cfg.seeds);
    const PdeReference fine = reference(cfg.dt / 2.0, 2 * steps);
    std::vector<RateCell> extra(cfg.n_list.size() * hs);
    for (std::size_t i = 0; i < cfg.n_list.size(); ++i) {
      for (std::size_t s = 0; s < hs; ++s) {
        auto& c = extra[i * hs + s];
        c.n = cfg.n_list[i];
        c.replicate = s;
        c.seed = subrun_seed(cfg.master_seed, c.n, s);
        c.dt = cfg.dt / 2.0;
      }
    }
    run_tasks(extra.size(), cfg.jobs, [&](std::size_t k) { run_cell(extra[k], fine, 2 * cfg.time_stride); });
    for (std::size_t i = 0; i < cfg.n_list.size(); ++i) {
      HalvingRow row;
      row.n = cfg.n_list[i];
      double a = 0.0, b = 0.0;
      std::size_t m = 0;
      for (std::size_t s = 0; s < hs; ++s) {
        const auto& coarse = rep.cells[i * cfg.seeds + s];
        const auto& half = extra[i * hs + s];
        if (coarse.failed || half.failed) continue;
        a += coarse.statistic;
        b += half.statistic;
        ++m;
      }
      row.mean_dt = m ? a / static_cast<double>(m) : std::nan("");
      row.mean_half_dt = m ? b / static_cast<double>(m) : std::nan("");
      rep.halving.push_back(row);
    }
    rep.cells.insert(rep.cells.end(), extra.begin(), extra.end());
  }
  return rep;
}

// ---------------------------------------------------------------- Glivenko-Cantelli

GcReport run_gc_experiment(const GcConfig& cfg) {
  check_n_list(cfg.n_list, 2);
  if (cfg.net.empty()) throw InvalidArgument("GC experiment needs a non-empty net");
  if (cfg.seeds == 0) throw InvalidArgument("GC experiment needs at least one seed");
  for (const auto& b : cfg.net) {
    if (b.dim() != 1) throw InvalidArgument("GC experiment runs in d = 1");
  }
  const std::size_t steps = sim_config(cfg.order, 1, cfg.horizon, cfg.dt, cfg.kappa, cfg.f0, cfg.velocity, 0).steps();

  std::vector<PdeReference> refs(cfg.net.size());
  run_tasks(cfg.net.size(), cfg.jobs, [&](std::size_t b) {
    if (cfg.order == Order::first) {
      refs[b].first = pde::evolve_linear_fp_path(cfg.f0.density_on_grid(1, cfg.grid.half_width, cfg.grid.cells),
                                                 cfg.net[b], cfg.dt, steps);
    } else {
      refs[b].second = pde::evolve_kinetic_path(phase_initial(cfg.f0, cfg.velocity, cfg.phase_grid, cfg.kappa),
                                                cfg.net[b], cfg.dt, steps);
    }
  });

  GcReport rep;
  rep.cells.resize(cfg.n_list.size() * cfg.seeds);
  run_tasks(rep.cells.size(), cfg.jobs, [&](std::size_t k) {
    auto& cell = rep.cells[k];
    cell.n = cfg.n_list[k / cfg.seeds];
    cell.replicate = k % cfg.seeds;
    cell.seed = subrun_seed(cfg.master_seed, cell.n, cell.replicate);
    const auto sc = sim_config(cfg.order, cell.n, cfg.horizon, cfg.dt, cfg.kappa, cfg.f0, cfg.velocity, cell.seed);
    try {
      const auto noise = particles::make_noise(sc);
      const auto init = particles::initial_state(sc);
      for (std::size_t b = 0; b < cfg.net.size(); ++b) {
        const auto bundle = particles::simulate_frozen(sc, cfg.net[b], noise, init);
        cell.per_field.push_back(refs[b].statistic(bundle, cfg.c, cfg.atom_budget, cfg.time_stride).value);
      }
      const auto it = std::max_element(cell.per_field.begin(), cell.per_field.end());
      cell.max_statistic = *it;
      cell.argmax = static_cast<std::size_t>(it - cell.per_field.begin());
    } catch (const SimulationDiverged& e) {
      cell.failed = true;
      cell.failure = e.what();
      cell.max_statistic = std::nan("");
    }
  });

  rep.aggregates = aggregate(cfg.n_list, [&](std::size_t i) {
    std::vector<double> v;
    for (std::size_t s = 0; s < cfg.seeds; ++s) {
      const auto& c = rep.cells[i * cfg.seeds + s];
      if (!c.failed) v.push_back(c.max_statistic);
    }
    return v;
  });
  rep.fit = fit_means(rep.aggregates);
  rep.monotone = strictly_decreasing(rep.aggregates);
  rep.dominance = true;
  for (const auto& c : rep.cells) {
    if (c.failed) continue;
    for (double v : c.per_field) {
      if (!(c.max_statistic >= v)) rep.dominance = false;
    }
  }
  return rep;
}

// ---------------------------------------------------------------- coupling

CouplingDecomposition run_coupling_decomposition(const CouplingConfig& cfg) {
  if (cfg.kernel.dim() != 1) throw InvalidArgument("coupling decomposition runs in d = 1");
  if (cfg.n < 2) throw InvalidArgument("coupling decomposition needs N >= 2");
  const auto sc = sim_config(Order::first, cfg.n, cfg.horizon, cfg.dt, 0.0, cfg.f0, cfg.f0, cfg.seed);
  const std::size_t steps = sc.steps();
  if (static_cast<double>(cfg.n) * cfg.grid.cells * static_cast<double>(steps + 1) > 4e9) {
    throw TooLarge("coupling decomposition exceeds the drift-sampling budget");
  }

  const auto noise = particles::make_noise(sc);
  const auto init = particles::initial_state(sc);
  const auto mu = particles::simulate_interacting(sc, cfg.kernel, noise);

  const auto f0 = cfg.f0.density_on_grid(1, cfg.grid.half_width, cfg.grid.cells);
  const auto limit = pde::evolve_mckean_path(f0, cfg.kernel, cfg.dt, steps);

  // b^N frozen on the grid, one slice per step
  const field::Kernel smooth = cfg.mollifier > 0.0 ? field::mollify_kernel(cfg.kernel, cfg.mollifier) : cfg.kernel;
  auto samples = std::make_shared<field::GridSamples>();
  samples->dim = 1;
  samples->half_width = cfg.grid.half_width;
  samples->nodes_per_axis = cfg.grid.cells;
  samples->dt = cfg.dt;
  const auto centers = f0.centers();
  for (std::size_t k = 0; k <= steps; ++k) {
    std::vector<double> v(centers.size());
    smooth.sum_over_sources(centers, mu.positions[k], v);
    for (double& x : v) x /= static_cast<double>(cfg.n);
    samples->slices.push_back(std::move(v));
  }
  const auto bN = field::DriftField::grid(samples, cfg.horizon, smooth.bound());
  const auto frozen_pde = pde::evolve_linear_fp_path(f0, bN, cfg.dt, steps);

  const auto b_inf = field::DriftField::grid(limit.drift, cfg.horizon, cfg.kernel.bound());
  const auto aux = particles::simulate_frozen(sc, b_inf, noise, init);

  CouplingDecomposition out;
  for (std::size_t k = 0; k <= steps; ++k) {
    const auto m = transport::uniform_measure(1, mu.positions[k]);
    const auto a = transport::uniform_measure(1, aux.positions[k]);
    out.times.push_back(mu.times[k]);
    out.particle_to_limit.push_back(transport::w1_1d(m, limit.densities[k]));
    out.particle_to_frozen_pde.push_back(transport::w1_1d(m, frozen_pde[k]));
    out.frozen_pde_to_limit.push_back(transport::w1_1d(frozen_pde[k], limit.densities[k]));
    out.particle_to_auxiliary.push_back(transport::w1_1d(m, a));
    out.auxiliary_to_limit.push_back(transport::w1_1d(a, limit.densities[k]));
  }
  out.new_route_holds = out.sznitman_route_holds = true;
  for (std::size_t k = 0; k < out.times.size(); ++k) {
    const double e1 = out.particle_to_limit[k] - out.particle_to_frozen_pde[k] - out.frozen_pde_to_limit[k];
    const double e2 = out.particle_to_limit[k] - out.particle_to_auxiliary[k] - out.auxiliary_to_limit[k];
    out.worst_excess = std::max({out.worst_excess, e1, e2});
    if (e1 > cfg.tolerance) out.new_route_holds = false;
    if (e2 > cfg.tolerance) out.sznitman_route_holds = false;
  }
  return out;
}

// ---------------------------------------------------------------- counterexample

double psi(double x) {
  const double a = std::abs(x);
  if (a <= 0.5) return 0.0;
  if (a >= 1.0) return 1.0;
  const double u = 2.0 * a - 1.0;
  return u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
}

double eta(double x) {
  const double u = 2.0 * x;
  if (std::abs(u) >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - u * u));
}

namespace {

struct SortingRun {
  double s = 0.0;
  double red_displacement = 0.0;
  double unsuppressed = 0.0;  // fraction of steps with psi_eps = 1
};

SortingRun sorting_run(std::size_t n, const CounterexampleConfig& cfg, double eps, std::uint64_t seed, bool drift_on) {
  const auto sc = sim_config(Order::first, n, cfg.horizon, cfg.dt, 0.0, cfg.f0, cfg.f0, seed);
  const std::size_t steps = sc.steps();
  const auto noise = particles::make_noise(sc);
  auto x = particles::initial_state(sc).positions;
  const auto x0 = x;
  const std::size_t half = n / 2;
  auto colour = [half](std::size_t i) { return i < half ? 1.0 : -1.0; };

  std::vector<std::size_t> order(n);
  std::vector<double> drift(n);
  std::size_t free_steps = 0;
  for (std::size_t k = 0; k < steps; ++k) {
    std::fill(drift.begin(), drift.end(), 0.0);
    if (drift_on) {
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
      double ps = 1.0;
      for (std::size_t a = 0; a < n && ps > 0.0; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
          const double gap = x[order[b]] - x[order[a]];
          if (gap >= eps) break;
          if (colour(order[a]) != colour(order[b])) ps *= psi(gap / eps);
        }
      }
      if (ps == 1.0) ++free_steps;
      if (ps > 0.0) {
        for (std::size_t a = 0; a < n; ++a) {
          const std::size_t i = order[a];
          double v = 1.0 * colour(i);  // own bump, eta(0) = 1
          for (std::size_t b = a + 1; b < n && x[order[b]] - x[i] < 0.5 * eps; ++b)
            v += colour(order[b]) * eta((x[i] - x[order[b]]) / eps);
          for (std::size_t b = a; b-- > 0 && x[i] - x[order[b]] < 0.5 * eps;)
            v += colour(order[b]) * eta((x[i] - x[order[b]]) / eps);
          drift[i] = std::clamp(ps * v, -1.0, 1.0);
        }
      }
    }
    const auto db = noise.step(k);
    for (std::size_t i = 0; i < n; ++i) x[i] = (x[i] + drift[i] * cfg.dt) + db[i];
  }

  SortingRun r;
  for (std::size_t i = 0; i < n; ++i) r.s += colour(i) * std::tanh(x[i] / cfg.g_width);
  r.s /= static_cast<double>(n);
  for (std::size_t i = 0; i < half; ++i) r.red_displacement += x[i] - x0[i];
  r.red_displacement /= static_cast<double>(half);
  r.unsuppressed = static_cast<double>(free_steps) / static_cast<double>(steps);
  return r;
}

}  // namespace

CounterexampleReport run_counterexample(const CounterexampleConfig& cfg) {
  if (cfg.n_list.empty()) throw InvalidArgument("counterexample needs at least one N");
  for (auto n : cfg.n_list) {
    if (n < 2 || n % 2 != 0) throw InvalidArgument("counterexample needs even N >= 2");
  }
  if (cfg.seeds == 0 || cfg.pilot_seeds == 0) throw InvalidArgument("counterexample needs seeds");
  if (!(cfg.g_width > 0.0)) throw InvalidArgument("counterexample: g width must be positive");

  CounterexampleReport rep;
  for (const std::size_t n : cfg.n_list) {
    CounterexampleRow row;
    row.n = n;
    if (cfg.ablate_drift) {
      row.eps = 0.0;
    } else {
      double eps = cfg.initial_eps;
      bool found = false;
      for (int h = 0; h <= cfg.max_halvings; ++h, eps /= 2.0) {
        std::vector<double> fr(cfg.pilot_seeds);
        run_tasks(cfg.pilot_seeds, cfg.jobs, [&](std::size_t s) {
          fr[s] = sorting_run(n, cfg, eps, rng::derive_seed(cfg.master_seed, 0x91107, n, s), true).unsuppressed;
        });
        row.pilot_unsuppressed = std::accumulate(fr.begin(), fr.end(), 0.0) / static_cast<double>(fr.size());
        if (row.pilot_unsuppressed >= cfg.unsuppressed_target) {
          found = true;
          break;
        }
      }
      if (!found) {
        throw ExperimentAborted("counterexample: no eps down to " + std::to_string(eps) + " reaches unsuppressed time " +
                                std::to_string(cfg.unsuppressed_target) + " T at N = " + std::to_string(n));
      }
      row.eps = eps;
    }

    std::vector<SortingRun> full(cfg.seeds), ablation(cfg.seeds);
    run_tasks(2 * cfg.seeds, cfg.jobs, [&](std::size_t k) {
      const std::size_t s = k % cfg.seeds;
      const std::uint64_t seed = subrun_seed(cfg.master_seed, n, s);
      if (k < cfg.seeds) {
        full[s] = sorting_run(n, cfg, row.eps, seed, !cfg.ablate_drift);
      } else {
        ablation[s] = sorting_run(n, cfg, row.eps, seed, false);
      }
    });
    const auto m = static_cast<double>(cfg.seeds);
    double ss = 0.0;
    for (std::size_t s = 0; s < cfg.seeds; ++s) {
      row.per_seed_s.push_back(full[s].s);
      row.per_seed_ablation.push_back(ablation[s].s);
      row.mean_s += full[s].s / m;
      row.mean_abs_s += std::abs(full[s].s) / m;
      row.ablation_mean_s += ablation[s].s / m;
      row.ablation_mean_abs_s += std::abs(ablation[s].s) / m;
      row.red_displacement += full[s].red_displacement / m;
      row.unsuppressed += full[s].unsuppressed / m;
    }
    for (double v : row.per_seed_s) ss += (v - row.mean_s) * (v - row.mean_s);
    row.half_width = cfg.seeds > 1 ? 1.96 * std::sqrt(ss / (m - 1.0) / m) : 0.0;
    row.predicted_push = cfg.horizon * (2.0 * row.unsuppressed - 1.0);
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

// ---------------------------------------------------------------- non-uniqueness

namespace {

struct Stencil {
  std::vector<double> offsets;
  std::vector<double> weights;
};

Stencil bump_stencil(int level) {
  constexpr int kPoints = 32;
  const double w = 1.0 / (static_cast<double>(level) * level);
  Stencil s;
  double total = 0.0;
  for (int m = 0; m < kPoints; ++m) {
    const double u = -1.0 + (2.0 * m + 1.0) / kPoints;
    s.offsets.push_back(w * u);
    s.weights.push_back(std::exp(-1.0 / (1.0 - u * u)));
    total += s.weights.back();
  }
  for (double& v : s.weights) v /= total;
  return s;
}

double stencil_power(double y, double alpha, const Stencil& s) {
  double v = 0.0;
  for (std::size_t m = 0; m < s.offsets.size(); ++m)
    v += s.weights[m] * std::min(std::pow(std::abs(y - s.offsets[m]), alpha), 1.0);
  return v;
}

}  // namespace

double mollified_power(double y, double alpha, int level) {
  if (level < 1) throw InvalidArgument("mollification level must be positive");
  return stencil_power(y, alpha, bump_stencil(level));
}

NonuniquenessReport run_nonuniqueness_demo(const NonuniquenessConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) throw InvalidArgument("non-uniqueness: alpha must lie in (0, 1]");
  if (cfg.levels.empty() || cfg.seeds == 0) throw InvalidArgument("non-uniqueness: need levels and seeds");
  const auto steps = static_cast<std::size_t>(std::llround(cfg.horizon / cfg.dt));
  if (steps == 0 || std::abs(static_cast<double>(steps) * cfg.dt - cfg.horizon) > 1e-9 * cfg.horizon) {
    throw InvalidArgument("non-uniqueness: horizon must be a whole number of steps");
  }

  NonuniquenessReport rep;
  rep.levels = cfg.levels;
  for (int level : cfg.levels) {
    const Stencil st = bump_stencil(level);
    const double at_zero = stencil_power(0.0, cfg.alpha, st);
    std::vector<double> gaps(cfg.seeds);
    run_tasks(cfg.seeds, cfg.jobs, [&](std::size_t s) {
      const particles::NoiseStore noise(subrun_seed(cfg.master_seed, 1, s), 1, 1, steps, cfg.dt);
      // X' = b^n_t(X) dt + dB with b^n_t(x) = F_n(x - B_t); the "-" schedule subtracts F_n(0)
      double up = 0.0, down = 0.0, b = 0.0;
      for (std::size_t k = 0; k < steps; ++k) {
        const double db = noise.step(k)[0];
        up = (up + stencil_power(up - b, cfg.alpha, st) * cfg.dt) + db;
        down = (down + (stencil_power(down - b, cfg.alpha, st) - at_zero) * cfg.dt) + db;
        b += db;
      }
      gaps[s] = std::abs(up - down);
    });
    const double above = static_cast<double>(std::count_if(gaps.begin(), gaps.end(),
                                                           [&](double g) { return g >= cfg.gap_threshold; }));
    rep.fraction_above.push_back(above / static_cast<double>(cfg.seeds));
    rep.mean_gap.push_back(std::accumulate(gaps.begin(), gaps.end(), 0.0) / static_cast<double>(cfg.seeds));
    rep.gaps.push_back(std::move(gaps));
  }
  return rep;
}

// ---------------------------------------------------------------- time regularity

TimeRegularityReport run_time_regularity(const TimeRegularityConfig& cfg) {
  check_n_list(cfg.n_list, 2);
  if (cfg.seeds == 0) throw InvalidArgument("time regularity needs seeds");
  if (cfg.probe_times < 2) throw InvalidArgument("time regularity needs at least two probe times");
  TimeRegularityReport rep;
  rep.n_list = cfg.n_list;
  rep.norms.assign(cfg.n_list.size(), std::vector<double>(cfg.seeds));
  const double alpha = std::max(cfg.kernel.holder().alpha, 1e-3);

  run_tasks(cfg.n_list.size() * cfg.seeds, cfg.jobs, [&](std::size_t k) {
    const std::size_t i = k / cfg.seeds, s = k % cfg.seeds;
    const auto sc = sim_config(Order::first, cfg.n_list[i], cfg.horizon, cfg.dt, 0.0, cfg.f0, cfg.f0,
                               subrun_seed(cfg.master_seed, cfg.n_list[i], s));
    const auto bundle = particles::simulate_interacting(sc, cfg.kernel, particles::make_noise(sc));
    const auto field = field::DriftField::empirical(cfg.kernel, particles::snapshot_series(bundle), true);
    field::HolderProbe probe;
    probe.alpha = alpha;
    probe.seed = rng::derive_seed(cfg.master_seed, 0x7E6, s);
    probe.times.clear();
    for (std::size_t j = 0; j < cfg.probe_times; ++j) {
      const std::size_t step = j * sc.steps() / (cfg.probe_times - 1);
      probe.times.push_back(bundle.times[step]);
    }
    rep.norms[i][s] = field::estimate_holder_norm(field, probe);
  });

  const auto& first = rep.norms.front();
  rep.a_star = 2.0 * std::accumulate(first.begin(), first.end(), 0.0) / static_cast<double>(first.size());
  rep.a_scan = cfg.a_scan;
  if (rep.a_scan.empty()) {
    for (int j = 1; j <= 16; ++j) rep.a_scan.push_back(rep.a_star * j / 8.0);
  }
  auto prob = [](const std::vector<double>& v, double a) {
    return static_cast<double>(std::count_if(v.begin(), v.end(), [a](double x) { return x > a; })) /
           static_cast<double>(v.size());
  };
  for (const auto& v : rep.norms) {
    std::vector<double> row;
    for (double a : rep.a_scan) row.push_back(prob(v, a));
    rep.probability.push_back(std::move(row));
    rep.probability_at_a_star.push_back(prob(v, rep.a_star));
  }
  rep.decreasing_at_a_star = true;
  for (std::size_t i = 1; i < rep.probability_at_a_star.size(); ++i) {
    if (rep.probability_at_a_star[i] > rep.probability_at_a_star[i - 1]) rep.decreasing_at_a_star = false;
  }
  return rep;
}

// ---------------------------------------------------------------- kernel ULLN

namespace {

std::vector<double> x_grid(const UllnConfig& cfg) {
  std::vector<double> x(static_cast<std::size_t>(cfg.x_points));
  for (int i = 0; i < cfg.x_points; ++i) x[i] = -cfg.half_width + 2.0 * cfg.half_width * i / (cfg.x_points - 1);
  return x;
}

// (1/N) sum_j K(x, X_j) on the x grid at every strided step.
std::vector<std::vector<double>> kernel_averages(const UllnConfig& cfg, const field::DriftField& b, std::size_t n,
                                                 std::uint64_t seed, const std::vector<double>& xs) {
  const auto sc = sim_config(Order::first, n, cfg.horizon, cfg.dt, 0.0, cfg.f0, cfg.f0, seed);
  const auto bundle = particles::simulate_frozen(sc, b, particles::make_noise(sc));
  std::vector<std::vector<double>> out;
  for (std::size_t k = 0; k < bundle.positions.size(); k += cfg.time_stride) {
    std::vector<double> v(xs.size());
    cfg.kernel.sum_over_sources(xs, bundle.positions[k], v);
    for (double& y : v) y /= static_cast<double>(n);
    out.push_back(std::move(v));
  }
  return out;
}

double weighted_gap(const UllnConfig& cfg, const std::vector<double>& xs, const std::vector<double>& a,
                    const std::vector<double>& b) {
  const double h = xs[1] - xs[0];
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double w = std::pow(1.0 + xs[i] * xs[i], -0.5 * cfg.weight_r) * std::abs(a[i] - b[i]);
    acc = cfg.q_infinite ? std::max(acc, w) : acc + w * w * h;
  }
  return cfg.q_infinite ? acc : std::sqrt(acc);
}

void check_ulln(const UllnConfig& cfg) {
  if (cfg.kernel.dim() != 1) throw InvalidArgument("kernel ULLN runs in d = 1");
  if (cfg.net.empty()) throw InvalidArgument("kernel ULLN needs a non-empty net");
  if (cfg.x_points < 2 || cfg.time_stride == 0) throw InvalidArgument("kernel ULLN: bad grid or stride");
  if (cfg.reference_n * static_cast<std::size_t>(cfg.x_points) > 50'000'000) {
    throw TooLarge("kernel ULLN reference run exceeds its budget");
  }
}

}  // namespace

double ulln_statistic(const UllnConfig& cfg, std::size_t n, std::uint64_t seed) {
  check_ulln(cfg);
  const auto xs = x_grid(cfg);
  double worst = 0.0;
  for (const auto& b : cfg.net) {
    const auto ref = kernel_averages(cfg, b, cfg.reference_n, cfg.reference_seed, xs);
    const auto emp = kernel_averages(cfg, b, n, seed, xs);
    for (std::size_t k = 0; k < ref.size(); ++k) worst = std::max(worst, weighted_gap(cfg, xs, emp[k], ref[k]));
  }
  return worst;
}

UllnReport run_ulln_for_kernel(const UllnConfig& cfg) {
  check_ulln(cfg);
  check_n_list(cfg.n_list, 2);
  const auto xs = x_grid(cfg);
  std::vector<std::vector<std::vector<double>>> refs(cfg.net.size());
  run_tasks(cfg.net.size(), cfg.jobs, [&](std::size_t b) {
    refs[b] = kernel_averages(cfg, cfg.net[b], cfg.reference_n, cfg.reference_seed, xs);
  });

  UllnReport rep;
  rep.n_list = cfg.n_list;
  rep.statistic.assign(cfg.n_list.size(), std::vector<double>(cfg.seeds, 0.0));
  run_tasks(cfg.n_list.size() * cfg.seeds, cfg.jobs, [&](std::size_t k) {
    const std::size_t i = k / cfg.seeds, s = k % cfg.seeds;
    double worst = 0.0;
    for (std::size_t b = 0; b < cfg.net.size(); ++b) {
      const auto emp = kernel_averages(cfg, cfg.net[b], cfg.n_list[i], subrun_seed(cfg.master_seed, cfg.n_list[i], s), xs);
      for (std::size_t t = 0; t < emp.size(); ++t) worst = std::max(worst, weighted_gap(cfg, xs, emp[t], refs[b][t]));
    }
    rep.statistic[i][s] = worst;
  });
  std::vector<double> ns;
  for (std::size_t i = 0; i < cfg.n_list.size(); ++i) {
    const auto& v = rep.statistic[i];
    rep.mean.push_back(std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()));
    ns.push_back(static_cast<double>(cfg.n_list[i]));
  }
  const bool positive = std::all_of(rep.mean.begin(), rep.mean.end(), [](double m) { return m > 0.0; });
  rep.fit = positive ? fit_loglog(ns, rep.mean) : LineFit{std::nan(""), std::nan("")};
  return rep;
}

// ---------------------------------------------------------------- energy estimate

EnergyCheckReport run_energy_check(const EnergyCheckConfig& cfg) {
  if (cfg.net_size < 2) throw InvalidArgument("energy check needs a net of at least two fields");
  const auto net = field::holder_net(cfg.ball, cfg.net_size, cfg.horizon);
  const auto f0 = cfg.f0.density_on_grid(1, cfg.grid.half_width, cfg.grid.cells);
  rng::Stream gen(cfg.seed, 0xE4E);
  EnergyCheckReport rep;
  rep.all_zero_at_start = rep.all_finite = true;
  for (std::size_t p = 0; p < cfg.pairs; ++p) {
    EnergyPair pair;
    pair.first = static_cast<std::size_t>(gen.uniform() * static_cast<double>(cfg.net_size));
    do {
      pair.second = static_cast<std::size_t>(gen.uniform() * static_cast<double>(cfg.net_size));
    } while (pair.second == pair.first);
    pair.report = pde::verify_energy_estimate(net[pair.first], net[pair.second], f0, cfg.horizon, cfg.dt, cfg.weights);
    rep.violations += pair.report.violations;
    if (!pair.report.lhs_zero_at_start) rep.all_zero_at_start = false;
    if (!std::isfinite(pair.report.fitted_constant)) rep.all_finite = false;
    rep.pairs.push_back(std::move(pair));
  }
  return rep;
}

// ---------------------------------------------------------------- PDE self-test

PdeSelftestReport run_pde_selftest(const PdeSelftestConfig& cfg) {
  if (cfg.halving_cells.size() < 3) throw InvalidArgument("PDE self-test needs three resolutions");
  particles::F0Spec f0;
  f0.scale = cfg.initial_scale;
  const auto steps = static_cast<std::size_t>(std::llround(cfg.horizon / cfg.dt));
  PdeSelftestReport rep;

  const auto init = f0.density_on_grid(1, cfg.half_width, cfg.cells);
  const double m0 = init.total_mass();
  const double v0 = init.variance();
  const auto path = pde::evolve_linear_fp_path(init, field::DriftField::zero(1, cfg.horizon), cfg.dt, steps);
  for (const auto& f : path) {
    rep.times.push_back(f.time);
    rep.variance.push_back(f.variance());
    rep.expected_variance.push_back(v0 + f.time);
    rep.mass_drift = std::max(rep.mass_drift, std::abs(f.total_mass() - m0));
    if (f.time > 0.0) {
      rep.worst_variance_rel_error =
          std::max(rep.worst_variance_rel_error, std::abs(f.variance() - (v0 + f.time)) / (v0 + f.time));
    }
  }

  // nonlinear run with the sine kernel at increasing resolution
  std::vector<GridDensity> finals;
  for (int g : cfg.halving_cells) {
    finals.push_back(pde::evolve_mckean(f0.density_on_grid(1, cfg.half_width, g), field::Kernel::sine(), cfg.dt, steps));
  }
  for (std::size_t i = 1; i < finals.size(); ++i) rep.halving_distances.push_back(transport::w1_1d(finals[i - 1], finals[i]));
  const auto& d = rep.halving_distances;
  rep.contraction = d[d.size() - 2] / d.back();
  return rep;
}

// ---------------------------------------------------------------- entropy

EntropyReport run_entropy_check(const EntropyCheckConfig& cfg) {
  if (cfg.eps.size() < 2) throw InvalidArgument("entropy check needs at least two eps values");
  if (cfg.max_points < 2 || cfg.max_points > covering::kMaxExhaustive) {
    throw InvalidArgument("entropy check: max_points must lie in [2, 20]");
  }
  rng::Stream gen(cfg.seed, 0xC0E);
  auto random_space = [&](std::size_t n) {
    std::vector<double> p(2 * n);
    for (double& x : p) x = gen.uniform();
    return covering::FiniteMetricSpace::from_points(p, 2);
  };
  auto random_size = [&] {
    return 2 + static_cast<std::size_t>(gen.uniform() * static_cast<double>(cfg.max_points - 1));
  };
  std::vector<covering::FiniteMetricSpace> xs, ys, zs;
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    xs.push_back(random_space(random_size()));
    ys.push_back(random_space(random_size()));
    zs.push_back(random_space(random_size()));
  }
  // random Lipschitz test functions: sums of sines with total slope 1
  struct Wave {
    double a[4], w[4], ph[4], norm;
  };
  std::vector<Wave> waves(16);
  for (auto& wv : waves) {
    wv.norm = 0.0;
    for (int k = 0; k < 4; ++k) {
      wv.a[k] = gen.uniform(-1.0, 1.0);
      wv.w[k] = gen.uniform(0.5, 12.0);
      wv.ph[k] = gen.uniform(-3.0, 3.0);
      wv.norm += std::abs(wv.a[k]) * wv.w[k];
    }
  }

  EntropyReport rep;
  std::vector<double> inv_eps, sizes;
  for (double eps : cfg.eps) {
    EntropyRow row;
    row.eps = eps;
    const auto net = covering::lip1_net(eps, cfg.half_width, cfg.weight_p);
    row.lip1_log_size = net.log_size;
    rep.predicted_exponent = net.predicted_exponent;
    for (const auto& wv : waves) {
      auto h = [&wv](double x) {
        double s = 0.0;
        for (int k = 0; k < 4; ++k) s += wv.a[k] * std::sin(wv.w[k] * x + wv.ph[k]);
        return s / wv.norm;
      };
      row.lip1_worst_distance = std::max(row.lip1_worst_distance, net.weighted_distance(net.snap(h), h, 2001));
    }
    row.count_greedy = covering::covering_number_greedy(zs.front(), eps).count;
    row.count_exact = covering::covering_number_exact(zs.front(), eps).count;
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      const auto pr = covering::product_entropy_check(xs[t], ys[t], eps);
      if (t == 0) row.bound_rhs = pr.entropy_x + pr.entropy_y;
      if (!pr.holds) ++row.product_violations;
      if (!covering::change_of_metric_check(zs[t], cfg.alpha, eps).holds) ++row.metric_violations;
    }
    inv_eps.push_back(1.0 / eps);
    sizes.push_back(row.lip1_log_size);
    rep.rows.push_back(row);
  }
  rep.scaling_exponent = fit_loglog(inv_eps, sizes).slope;
  return rep;
}

}  // namespace chaoslab::experiments
