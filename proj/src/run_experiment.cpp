#include <chrono>
#include <cmath>
#include <ctime>

#include "chaoslab/digest.hpp"
#include "chaoslab/errors.hpp"
#include "chaoslab/run_io.hpp"

namespace chaoslab::io {

using nlohmann::json;
namespace fs = std::filesystem;
namespace ex = chaoslab::experiments;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string num(double x) { return format_double(x); }
std::string num(std::size_t x) { return std::to_string(x); }

// Collects artifacts as they are written.
class Sink {
 public:
  explicit Sink(fs::path dir) : dir_(std::move(dir)) {}

  void csv(const std::string& name, const CsvWriter& w, std::vector<std::string> volatile_columns = {}) {
    put(name, w.str(), std::move(volatile_columns));
  }
  void text(const std::string& name, const std::string& content) { put(name, content, {}); }
  void plot(const std::string& name, const PlotSpec& spec) { put(name, render_svg(spec), {}); }
  void summary(const json& j) { put("summary.json", j.dump(2) + "\n", {}); }

  std::vector<Artifact> artifacts;

 private:
  void put(const std::string& name, const std::string& content, std::vector<std::string> volatile_columns) {
    write_file_atomic(dir_ / name, content);
    artifacts.push_back({name, content_digest(content, volatile_columns), std::move(volatile_columns)});
  }
  fs::path dir_;
};

particles::Order order_of(const RunConfig& c) {
  return c.order == "second" ? particles::Order::second : particles::Order::first;
}

field::HolderBallSpec ball_of(const RunConfig& c) {
  field::HolderBallSpec b;
  b.alpha = c.net.alpha;
  b.radius = c.net.radius;
  b.mode_count = c.net.modes;
  b.frequency_cap = c.net.frequency_cap;
  return b;
}

json aggregates_json(const std::vector<ex::RateAggregate>& a) {
  json out = json::array();
  for (const auto& r : a)
    out.push_back({{"N", r.n}, {"completed", r.completed}, {"mean", r.mean}, {"std_error", r.std_error}});
  return out;
}

CsvWriter aggregates_csv(const std::vector<ex::RateAggregate>& a) {
  CsvWriter w({"N", "completed", "mean", "std_error", "subgaussian"});
  for (const auto& r : a) w.row({num(r.n), num(r.completed), num(r.mean), num(r.std_error), num(r.subgaussian)});
  return w;
}

Series mean_series(const std::vector<ex::RateAggregate>& a, const std::string& label) {
  Series s{label, {}, {}};
  for (const auto& r : a) {
    s.x.push_back(static_cast<double>(r.n));
    s.y.push_back(r.mean);
  }
  return s;
}

void run_rate(const RunConfig& c, const std::string& id, Sink& sink, json& seeds) {
  ex::RateConfig rc;
  rc.kernel = c.kernel->build();
  rc.order = order_of(c);
  rc.f0 = c.f0;
  rc.velocity = c.velocity;
  rc.kappa = c.kappa;
  rc.n_list = c.n_list;
  rc.seeds = c.seeds;
  rc.master_seed = c.seed;
  rc.dt = c.dt;
  rc.horizon = c.horizon;
  rc.grid = c.grid;
  rc.phase_grid = c.phase_grid;
  rc.c = c.c;
  rc.time_stride = c.time_stride;
  rc.atom_budget = c.atom_budget;
  rc.halving_seeds = c.halving_seeds;
  rc.bootstrap = c.bootstrap;
  rc.gamma_case = c.kernel->gamma_case();
  rc.moment_p = c.moment_p;
  rc.self_interaction = c.self_interaction;
  rc.jobs = c.jobs;
  const auto rep = ex::run_chaos_rate(rc);

  CsvWriter raw({"experiment_id", "N", "seed", "sup_stat", "w1_initial", "dt", "wallclock_ms"});
  json subruns = json::array();
  for (const auto& cell : rep.cells) {
    raw.row({id, num(cell.n), std::to_string(cell.seed), cell.failed ? "nan" : num(cell.statistic),
             num(cell.initial), num(cell.dt), num(cell.wallclock_ms)});
    subruns.push_back({{"N", cell.n}, {"replicate", cell.replicate}, {"seed", cell.seed}, {"dt", cell.dt}});
  }
  seeds["subruns"] = subruns;
  sink.csv("raw.csv", raw, {"wallclock_ms"});
  sink.csv("aggregates.csv", aggregates_csv(rep.aggregates));

  CsvWriter halving({"N", "mean_dt", "mean_half_dt"});
  for (const auto& h : rep.halving) halving.row({num(h.n), num(h.mean_dt), num(h.mean_half_dt)});
  sink.csv("halving.csv", halving);

  PlotSpec plot;
  plot.kind = PlotKind::loglog;
  plot.title = "Compensated sup distance against N";
  plot.x_label = "N";
  plot.y_label = "mean statistic";
  plot.series.push_back(mean_series(rep.aggregates, "mean over seeds"));
  plot.gamma_reference = rep.gamma_theory;
  sink.plot("rate.svg", plot);

  json failures = json::array();
  for (const auto& cell : rep.cells)
    if (cell.failed) failures.push_back({{"N", cell.n}, {"seed", cell.seed}, {"reason", cell.failure}});
  sink.summary({{"slope", rep.fit.slope},
                {"intercept", rep.fit.intercept},
                {"slope_ci", {rep.slope_lo, rep.slope_hi}},
                {"gamma", rep.gamma_theory ? json(*rep.gamma_theory) : json(nullptr)},
                {"gamma_text", rep.gamma_text},
                {"envelope_constant", rep.envelope_constant},
                {"envelope_holds", rep.envelope_holds},
                {"monotone", rep.monotone},
                {"aggregates", aggregates_json(rep.aggregates)},
                {"failures", failures}});
}

void run_gc(const RunConfig& c, const std::string& id, Sink& sink) {
  ex::GcConfig gc;
  gc.net = field::holder_net(ball_of(c), c.net.size, c.horizon);
  gc.order = order_of(c);
  gc.f0 = c.f0;
  gc.velocity = c.velocity;
  gc.kappa = c.kappa;
  gc.n_list = c.n_list;
  gc.seeds = c.seeds;
  gc.master_seed = c.seed;
  gc.dt = c.dt;
  gc.horizon = c.horizon;
  gc.grid = c.grid;
  gc.phase_grid = c.phase_grid;
  gc.c = c.c;
  gc.time_stride = c.time_stride;
  gc.atom_budget = c.atom_budget;
  gc.jobs = c.jobs;
  const auto rep = ex::run_gc_experiment(gc);

  CsvWriter raw({"experiment_id", "N", "seed", "field", "sup_stat"});
  CsvWriter maxes({"experiment_id", "N", "seed", "max_stat", "argmax"});
  for (const auto& cell : rep.cells) {
    for (std::size_t k = 0; k < cell.per_field.size(); ++k)
      raw.row({id, num(cell.n), std::to_string(cell.seed), num(k), num(cell.per_field[k])});
    maxes.row({id, num(cell.n), std::to_string(cell.seed), cell.failed ? "nan" : num(cell.max_statistic),
               num(cell.argmax)});
  }
  sink.csv("raw.csv", raw);
  sink.csv("max.csv", maxes);
  sink.csv("aggregates.csv", aggregates_csv(rep.aggregates));

  PlotSpec plot;
  plot.kind = PlotKind::loglog;
  plot.title = "Sup over the drift net against N";
  plot.x_label = "N";
  plot.y_label = "mean max statistic";
  plot.series.push_back(mean_series(rep.aggregates, "max over net"));
  sink.plot("gc.svg", plot);
  sink.summary({{"slope", rep.fit.slope},
                {"monotone", rep.monotone},
                {"dominance", rep.dominance},
                {"aggregates", aggregates_json(rep.aggregates)}});
}

void run_coupling(const RunConfig& c, Sink& sink) {
  ex::CouplingConfig cc;
  cc.kernel = c.kernel->build();
  cc.f0 = c.f0;
  cc.n = c.n_list.front();
  cc.seed = c.seed;
  cc.dt = c.dt;
  cc.horizon = c.horizon;
  cc.grid = c.grid;
  const auto rep = ex::run_coupling_decomposition(cc);

  CsvWriter w({"t", "particle_to_limit", "particle_to_frozen_pde", "frozen_pde_to_limit", "particle_to_auxiliary",
               "auxiliary_to_limit"});
  for (std::size_t i = 0; i < rep.times.size(); ++i) {
    w.row({num(rep.times[i]), num(rep.particle_to_limit[i]), num(rep.particle_to_frozen_pde[i]),
           num(rep.frozen_pde_to_limit[i]), num(rep.particle_to_auxiliary[i]), num(rep.auxiliary_to_limit[i])});
  }
  sink.csv("curves.csv", w);

  PlotSpec plot;
  plot.title = "Coupling decomposition";
  plot.x_label = "t";
  plot.y_label = "W1";
  auto add = [&](const std::string& label, const std::vector<double>& y) { plot.series.push_back({label, rep.times, y}); };
  add("particles to limit", rep.particle_to_limit);
  add("particles to frozen PDE", rep.particle_to_frozen_pde);
  add("frozen PDE to limit", rep.frozen_pde_to_limit);
  add("particles to auxiliary", rep.particle_to_auxiliary);
  add("auxiliary to limit", rep.auxiliary_to_limit);
  sink.plot("coupling.svg", plot);
  sink.summary({{"new_route_holds", rep.new_route_holds},
                {"sznitman_route_holds", rep.sznitman_route_holds},
                {"worst_excess", rep.worst_excess}});
}

void run_counter(const RunConfig& c, Sink& sink) {
  ex::CounterexampleConfig cc;
  cc.n_list = c.n_list;
  cc.horizon = c.horizon;
  cc.dt = c.dt;
  cc.seeds = c.seeds;
  cc.master_seed = c.seed;
  cc.f0 = c.f0;
  cc.g_width = c.g_width;
  cc.unsuppressed_target = c.unsuppressed_target;
  cc.pilot_seeds = c.pilot_seeds;
  cc.jobs = c.jobs;
  const auto rep = ex::run_counterexample(cc);

  CsvWriter rows({"N", "eps", "pilot_unsuppressed", "mean_S", "half_width", "mean_abs_S", "ablation_mean_S",
                  "ablation_mean_abs_S", "red_displacement", "unsuppressed", "predicted_push"});
  CsvWriter per({"N", "replicate", "S", "S_ablation"});
  json out = json::array();
  Series s{"mean S", {}, {}}, a{"ablation mean |S|", {}, {}};
  for (const auto& r : rep.rows) {
    rows.row({num(r.n), num(r.eps), num(r.pilot_unsuppressed), num(r.mean_s), num(r.half_width), num(r.mean_abs_s),
              num(r.ablation_mean_s), num(r.ablation_mean_abs_s), num(r.red_displacement), num(r.unsuppressed),
              num(r.predicted_push)});
    for (std::size_t k = 0; k < r.per_seed_s.size(); ++k)
      per.row({num(r.n), num(k), num(r.per_seed_s[k]), num(r.per_seed_ablation[k])});
    s.x.push_back(static_cast<double>(r.n));
    s.y.push_back(r.mean_s);
    a.x.push_back(static_cast<double>(r.n));
    a.y.push_back(r.ablation_mean_abs_s);
    out.push_back({{"N", r.n}, {"eps", r.eps}, {"mean_S", r.mean_s}, {"ablation_mean_abs_S", r.ablation_mean_abs_s}});
  }
  sink.csv("rows.csv", rows);
  sink.csv("per_seed.csv", per);
  PlotSpec plot;
  plot.title = "Colour-weighted displacement";
  plot.x_label = "N";
  plot.y_label = "S";
  plot.series = {s, a};
  sink.plot("counterexample.svg", plot);
  sink.summary({{"rows", out}});
}

void run_nonunique(const RunConfig& c, Sink& sink) {
  ex::NonuniquenessConfig nc;
  nc.alpha = c.nonuniqueness_alpha;
  nc.levels = c.levels;
  nc.seeds = c.seeds;
  nc.master_seed = c.seed;
  nc.horizon = c.horizon;
  nc.dt = c.dt;
  nc.gap_threshold = c.gap_threshold;
  nc.jobs = c.jobs;
  const auto rep = ex::run_nonuniqueness_demo(nc);

  CsvWriter gaps({"level", "replicate", "gap"});
  Series f{"fraction above threshold", {}, {}}, m{"mean gap", {}, {}};
  for (std::size_t l = 0; l < rep.levels.size(); ++l) {
    for (std::size_t k = 0; k < rep.gaps[l].size(); ++k)
      gaps.row({std::to_string(rep.levels[l]), num(k), num(rep.gaps[l][k])});
    f.x.push_back(rep.levels[l]);
    f.y.push_back(rep.fraction_above[l]);
    m.x.push_back(rep.levels[l]);
    m.y.push_back(rep.mean_gap[l]);
  }
  sink.csv("gaps.csv", gaps);
  PlotSpec plot;
  plot.title = "Gap between the two limits";
  plot.x_label = "mollification level";
  plot.y_label = "gap";
  plot.series = {f, m};
  sink.plot("nonuniqueness.svg", plot);
  sink.summary({{"levels", rep.levels}, {"fraction_above", rep.fraction_above}, {"mean_gap", rep.mean_gap}});
}

void run_time_reg(const RunConfig& c, Sink& sink) {
  ex::TimeRegularityConfig tc;
  tc.kernel = c.kernel->build();
  tc.f0 = c.f0;
  tc.n_list = c.n_list;
  tc.seeds = c.seeds;
  tc.master_seed = c.seed;
  tc.dt = c.dt;
  tc.horizon = c.horizon;
  tc.a_scan = c.a_scan;
  tc.jobs = c.jobs;
  const auto rep = ex::run_time_regularity(tc);

  CsvWriter norms({"N", "replicate", "increment_norm"});
  CsvWriter prob({"N", "A", "probability"});
  PlotSpec heat;
  heat.kind = PlotKind::heatmap;
  heat.title = "P(norm > A), rows N, columns A";
  heat.heat_columns = static_cast<int>(rep.a_scan.size());
  heat.heat_rows = static_cast<int>(rep.n_list.size());
  for (std::size_t i = 0; i < rep.n_list.size(); ++i) {
    for (std::size_t k = 0; k < rep.norms[i].size(); ++k) norms.row({num(rep.n_list[i]), num(k), num(rep.norms[i][k])});
    for (std::size_t a = 0; a < rep.a_scan.size(); ++a) {
      prob.row({num(rep.n_list[i]), num(rep.a_scan[a]), num(rep.probability[i][a])});
      heat.heat.push_back(rep.probability[i][a]);
    }
  }
  sink.csv("norms.csv", norms);
  sink.csv("probability.csv", prob);
  sink.plot("time_regularity.svg", heat);
  sink.summary({{"a_star", rep.a_star},
                {"probability_at_a_star", rep.probability_at_a_star},
                {"decreasing_at_a_star", rep.decreasing_at_a_star}});
}

void run_ulln(const RunConfig& c, Sink& sink) {
  ex::UllnConfig uc;
  uc.kernel = c.kernel->build();
  uc.net = field::holder_net(ball_of(c), c.net.size, c.horizon);
  uc.f0 = c.f0;
  uc.n_list = c.n_list;
  uc.seeds = c.seeds;
  uc.master_seed = c.seed;
  uc.reference_n = c.reference_n;
  uc.dt = c.dt;
  uc.horizon = c.horizon;
  uc.time_stride = c.time_stride;
  uc.weight_r = c.ulln_r;
  uc.q_infinite = c.ulln_q_infinite;
  uc.half_width = c.grid.half_width;
  uc.jobs = c.jobs;
  const auto rep = ex::run_ulln_for_kernel(uc);

  CsvWriter w({"N", "replicate", "statistic"});
  for (std::size_t i = 0; i < rep.n_list.size(); ++i)
    for (std::size_t k = 0; k < rep.statistic[i].size(); ++k)
      w.row({num(rep.n_list[i]), num(k), num(rep.statistic[i][k])});
  sink.csv("statistic.csv", w);
  PlotSpec plot;
  plot.kind = PlotKind::loglog;
  plot.title = "Kernel deviation over the drift net";
  plot.x_label = "N";
  plot.y_label = "mean statistic";
  Series s{"mean over seeds", {}, rep.mean};
  for (auto n : rep.n_list) s.x.push_back(static_cast<double>(n));
  plot.series.push_back(s);
  sink.plot("ulln.svg", plot);
  sink.summary({{"slope", rep.fit.slope}, {"mean", rep.mean}});
}

void run_entropy(const RunConfig& c, Sink& sink) {
  ex::EntropyCheckConfig ec;
  ec.eps = c.eps;
  ec.half_width = c.lip1_half_width;
  ec.weight_p = c.weight_p;
  ec.trials = c.trials;
  ec.alpha = c.entropy_alpha;
  ec.seed = c.seed;
  const auto rep = ex::run_entropy_check(ec);

  CsvWriter w({"eps", "lip1_log_size", "count_greedy", "count_exact", "bound_rhs", "product_violations",
               "metric_violations", "lip1_worst_distance"});
  Series s{"log net size", {}, {}};
  for (const auto& r : rep.rows) {
    w.row({num(r.eps), num(r.lip1_log_size), num(r.count_greedy), num(r.count_exact), num(r.bound_rhs),
           num(r.product_violations), num(r.metric_violations), num(r.lip1_worst_distance)});
    s.x.push_back(1.0 / r.eps);
    s.y.push_back(r.lip1_log_size);
  }
  sink.csv("entropy.csv", w);
  PlotSpec plot;
  plot.kind = PlotKind::loglog;
  plot.title = "Entropy of the weighted Lipschitz ball";
  plot.x_label = "1/eps";
  plot.y_label = "log net size";
  plot.series.push_back(s);
  sink.plot("entropy.svg", plot);
  sink.summary({{"scaling_exponent", rep.scaling_exponent}, {"predicted_exponent", rep.predicted_exponent}});
}

void run_energy(const RunConfig& c, Sink& sink) {
  ex::EnergyCheckConfig ec;
  ec.ball = ball_of(c);
  ec.net_size = c.net.size;
  ec.pairs = c.pairs;
  ec.seed = c.seed;
  ec.f0 = c.f0;
  ec.grid = c.grid;
  ec.horizon = c.horizon;
  ec.dt = c.dt;
  ec.weights.r = c.energy_r;
  ec.weights.q = c.energy_q.value_or(INFINITY);
  const auto rep = ex::run_energy_check(ec);

  CsvWriter w({"first", "second", "step", "t", "lhs", "rhs"});
  for (const auto& p : rep.pairs) {
    for (std::size_t k = 0; k < p.report.times.size(); ++k)
      w.row({num(p.first), num(p.second), num(k), num(p.report.times[k]), num(p.report.lhs[k]), num(p.report.rhs[k])});
  }
  sink.csv("energy.csv", w);
  sink.summary({{"violations", rep.violations},
                {"all_zero_at_start", rep.all_zero_at_start},
                {"all_finite", rep.all_finite}});
}

void run_pde(const RunConfig& c, Sink& sink) {
  ex::PdeSelftestConfig pc;
  pc.initial_scale = c.f0.scale;
  pc.half_width = c.grid.half_width;
  pc.cells = c.grid.cells;
  pc.horizon = c.horizon;
  pc.dt = c.dt;
  const auto rep = ex::run_pde_selftest(pc);

  CsvWriter w({"t", "variance", "expected_variance"});
  for (std::size_t i = 0; i < rep.times.size(); ++i)
    w.row({num(rep.times[i]), num(rep.variance[i]), num(rep.expected_variance[i])});
  sink.csv("variance.csv", w);
  PlotSpec plot;
  plot.title = "Variance of the heat flow";
  plot.x_label = "t";
  plot.y_label = "variance";
  plot.series = {{"numerical", rep.times, rep.variance}, {"exact", rep.times, rep.expected_variance}};
  sink.plot("pde_selftest.svg", plot);
  sink.summary({{"worst_variance_rel_error", rep.worst_variance_rel_error},
                {"mass_drift", rep.mass_drift},
                {"halving_distances", rep.halving_distances},
                {"contraction", rep.contraction}});
}

}  // namespace

RunManifest run_experiment(const RunConfig& config, const fs::path& out) {
  if (kind_needs_kernel(config.experiment) && !config.kernel) {
    throw ConfigError("kernel: required for experiment " + std::string(kind_name(config.experiment)));
  }
  fs::create_directories(out);
  RunManifest m;
  m.config = config_to_json(config);
  m.config_hash = config_hash(config);
  m.code_version = code_version();
  m.master_seed = config.seed;
  m.seeds = {{"master", config.seed}, {"rule", "derive_seed(master, 0x5EED, N, replicate)"}};
  m.started = utc_now();
  const std::string id = std::string(kind_name(config.experiment)) + "-" + m.config_hash.substr(0, 12);

  Sink sink(out);
  switch (config.experiment) {
    case ExperimentKind::chaos_rate: run_rate(config, id, sink, m.seeds); break;
    case ExperimentKind::gc_sup: run_gc(config, id, sink); break;
    case ExperimentKind::coupling_decomp: run_coupling(config, sink); break;
    case ExperimentKind::counterexample: run_counter(config, sink); break;
    case ExperimentKind::nonuniqueness: run_nonunique(config, sink); break;
    case ExperimentKind::time_regularity: run_time_reg(config, sink); break;
    case ExperimentKind::ulln_kernel: run_ulln(config, sink); break;
    case ExperimentKind::entropy_check: run_entropy(config, sink); break;
    case ExperimentKind::energy_check: run_energy(config, sink); break;
    case ExperimentKind::pde_selftest: run_pde(config, sink); break;
  }
  m.artifacts = std::move(sink.artifacts);
  m.finished = utc_now();
  write_file_atomic(out / "manifest.json", manifest_to_json(m).dump(2) + "\n");
  return m;
}

}  // namespace chaoslab::io
