// Acceptance harness: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "chaoslab/covering.hpp"
#include "chaoslab/errors.hpp"
#include "chaoslab/experiments.hpp"
#include "chaoslab/particles.hpp"
#include "chaoslab/run_io.hpp"
#include "chaoslab/transport.hpp"
#include "oracles/dense_lp.hpp"

using namespace chaoslab;
namespace ex = chaoslab::experiments;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kTransportTol = 1e-9;
constexpr double kVarianceRelTol = 0.01;
constexpr double kMassDriftTol = 1e-8;
constexpr double kContractionMin = 1.5;
constexpr double kReferenceTol = 1e-12;
constexpr double kLipschitzSlopeMax = -0.35;
constexpr double kCouplingTol = 1e-8;
constexpr double kCounterexampleMeanMin = 0.2;
constexpr double kAblationFactor = 3.0;
constexpr double kGapFractionMin = 0.6;
constexpr double kControlGapMax = 0.05;
constexpr double kEntropyExponentLo = 0.7;
constexpr double kEntropyExponentHi = 1.4;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string join(const std::vector<double>& v, const char* f = "%.4g") {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(f, v[i]);
  return s + "]";
}

// ---------------------------------------------------------------- 1

Outcome transport_oracle() {
  std::mt19937_64 gen(0xACCE);
  std::uniform_real_distribution<double> pos(-5.0, 5.0), w(0.05, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + gen() % 32, n = 1 + gen() % 32;
    auto draw = [&](std::size_t k) {
      std::vector<double> a(k), b(k);
      for (auto& x : a) x = pos(gen);
      double s = 0;
      for (auto& x : b) s += (x = w(gen));
      for (auto& x : b) x /= s;
      return transport::make_measure(1, a, b);
    };
    const auto mu = draw(m), nu = draw(n);
    std::vector<std::vector<double>> cost(m, std::vector<double>(n));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) cost[i][j] = std::abs(mu.atoms[i] - nu.atoms[j]);
    const double lp = oracle::transport_lp(mu.weights, nu.weights, cost);
    const double a = transport::w1_1d(mu, nu);
    const double b = transport::w1_exact(mu, nu).value;
    worst = std::max({worst, std::abs(a - lp), std::abs(b - lp), std::abs(a - b)});
  }
  return {worst <= kTransportTol, "200 instances, worst disagreement " + fmt("%.2e", worst)};
}

// ---------------------------------------------------------------- 2

Outcome pde_sanity() {
  ex::PdeSelftestConfig c;  // d = 1, G = 512, T = 1
  const auto r = ex::run_pde_selftest(c);
  const bool ok = r.worst_variance_rel_error <= kVarianceRelTol && r.mass_drift <= kMassDriftTol &&
                  r.contraction >= kContractionMin;
  return {ok, "variance rel error " + fmt("%.2e", r.worst_variance_rel_error) + ", mass drift " +
                  fmt("%.2e", r.mass_drift) + ", halving contraction " + fmt("%.3f", r.contraction)};
}

// ---------------------------------------------------------------- 3

Outcome zero_drift_exactness() {
  particles::SimConfig c;
  c.n = 256;
  c.horizon = 1.0;
  c.dt = 1.0 / 512;
  c.seed = 77;
  const auto noise = particles::make_noise(c);
  const auto run = particles::simulate_interacting(c, field::Kernel::zero(), noise);
  auto x = particles::initial_state(c).positions;
  for (std::size_t k = 0; k < c.steps(); ++k) {
    const auto db = noise.step(k);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += db[i];
  }
  const bool exact = run.positions.back() == x;

  particles::SimConfig s = c;
  s.order = particles::Order::second;
  s.kappa = 0.8;
  const auto init = particles::initial_state(s);
  const auto ref = particles::reference_trajectories(s, init);
  double worst = 0.0;
  for (std::size_t k = 0; k <= s.steps(); ++k) {
    const double t = k * s.dt;
    for (std::size_t i = 0; i < s.n; ++i) {
      const double v0 = init.velocities[i], x0 = init.positions[i];
      worst = std::max(worst, std::abs(ref.velocities[k][i] - v0 * std::exp(-s.kappa * t)));
      worst = std::max(worst, std::abs(ref.positions[k][i] - (x0 + v0 * (1.0 - std::exp(-s.kappa * t)) / s.kappa)));
    }
  }
  return {exact && worst <= kReferenceTol, std::string("first order ") + (exact ? "bit-exact" : "NOT bit-exact") +
                                                ", second-order reference worst error " + fmt("%.2e", worst)};
}

// ---------------------------------------------------------------- 4, 5

ex::RateConfig rate_config(field::Kernel kernel) {
  ex::RateConfig c;
  c.kernel = std::move(kernel);
  c.f0 = {particles::F0Family::gaussian, 0.0, 1.0, 4.0};
  c.moment_p = 4.0;
  c.n_list = {128, 256, 512, 1024, 2048};
  c.seeds = 32;
  c.master_seed = 2024;
  return c;
}

Outcome holder_envelope() {
  auto c = rate_config(field::Kernel::holder_power(0.5));
  c.gamma_case = covering::HolderCase{covering::Rational(1, 2)};
  const auto r = ex::run_chaos_rate(c);
  std::vector<double> means;
  for (const auto& a : r.aggregates) means.push_back(a.mean);
  const bool gamma_ok = r.gamma_theory && std::abs(*r.gamma_theory - 1.0 / 14.0) < 1e-15;
  return {gamma_ok && r.monotone && r.envelope_holds,
          "gamma " + r.gamma_text + ", means " + join(means) + ", monotone " + (r.monotone ? "yes" : "no") +
              ", envelope " + (r.envelope_holds ? "holds" : "violated") + ", fitted slope " + fmt("%.3f", r.fit.slope)};
}

Outcome lipschitz_contrast() {
  auto c = rate_config(field::Kernel::sine());
  c.gamma_case = covering::HolderCase{covering::Rational(1)};
  const auto r = ex::run_chaos_rate(c);
  std::vector<double> means;
  for (const auto& a : r.aggregates) means.push_back(a.mean);
  return {r.fit.slope <= kLipschitzSlopeMax, "fitted slope " + fmt("%.3f", r.fit.slope) + " (95% bootstrap [" +
                                                 fmt("%.3f", r.slope_lo) + ", " + fmt("%.3f", r.slope_hi) +
                                                 "]), means " + join(means)};
}

// ---------------------------------------------------------------- 6

Outcome coupling() {
  ex::CouplingConfig c;
  c.kernel = field::Kernel::sine();
  c.n = 512;
  c.seed = 6;
  c.tolerance = kCouplingTol;
  const auto r = ex::run_coupling_decomposition(c);
  c.kernel = field::Kernel::zero();
  const auto z = ex::run_coupling_decomposition(c);
  double ablation = 0.0;
  for (double v : z.particle_to_auxiliary) ablation = std::max(ablation, v);
  const bool ok = r.new_route_holds && r.sznitman_route_holds && ablation == 0.0;
  return {ok, std::string("routes ") + (r.new_route_holds ? "hold" : "fail") + "/" +
                  (r.sznitman_route_holds ? "hold" : "fail") + " at " + std::to_string(r.times.size()) +
                  " times, worst excess " + fmt("%.2e", r.worst_excess) + ", ablation max distance " +
                  fmt("%.1e", ablation)};
}

// ---------------------------------------------------------------- 7

Outcome glivenko_cantelli() {
  ex::GcConfig c;
  field::HolderBallSpec ball;
  ball.alpha = 0.75;
  ball.radius = 1.0;
  c.net = field::holder_net(ball, 8, c.horizon);
  c.n_list = {128, 256, 512, 1024, 2048};
  c.seeds = 16;
  c.master_seed = 7;
  const auto r = ex::run_gc_experiment(c);
  std::vector<double> means;
  for (const auto& a : r.aggregates) means.push_back(a.mean);
  return {r.monotone && r.dominance, "mean max statistic " + join(means) + ", monotone " +
                                         (r.monotone ? "yes" : "no") + ", dominance " + (r.dominance ? "yes" : "no")};
}

// ---------------------------------------------------------------- 8

Outcome counterexample() {
  ex::CounterexampleConfig c;  // N in {16, 64, 256}, T = 4, 64 seeds
  c.master_seed = 8;
  const auto r = ex::run_counterexample(c);
  bool ok = true;
  std::ostringstream d;
  for (const auto& row : r.rows) {
    if (d.tellp() > 0) d << "; ";
    const double bound = kAblationFactor / std::sqrt(static_cast<double>(row.n));
    ok = ok && row.mean_s >= kCounterexampleMeanMin && row.ablation_mean_abs_s <= bound &&
         row.red_displacement >= c.horizon / 2;
    d << "N=" << row.n << ": S " << fmt("%.3f", row.mean_s) << ", ablation |S| " << fmt("%.3f", row.ablation_mean_abs_s)
      << " (<= " << fmt("%.3f", bound) << "), red displacement " << fmt("%.2f", row.red_displacement);
  }
  return {ok, d.str()};
}

// ---------------------------------------------------------------- 9

Outcome nonuniqueness() {
  ex::NonuniquenessConfig c;  // alpha = 1/2, levels {4, 8, 16}, 50 seeds
  c.master_seed = 9;
  const auto r = ex::run_nonuniqueness_demo(c);
  bool ok = true;
  for (double f : r.fraction_above) ok = ok && f >= kGapFractionMin;
  ex::NonuniquenessConfig control = c;
  control.alpha = 1.0;
  control.levels = {16};
  const auto k = ex::run_nonuniqueness_demo(control);
  double worst = 0.0;
  for (double g : k.gaps[0]) worst = std::max(worst, g);
  ok = ok && worst <= kControlGapMax;
  return {ok, "fraction with gap >= 0.5 " + join(r.fraction_above) + ", control worst gap at n=16 " +
                  fmt("%.4f", worst)};
}

// ---------------------------------------------------------------- 10

Outcome energy() {
  ex::EnergyCheckConfig c;
  c.ball.alpha = 0.75;
  c.pairs = 10;
  c.seed = 10;
  const auto r = ex::run_energy_check(c);
  double cmax = 0.0;
  for (const auto& p : r.pairs) cmax = std::max(cmax, p.report.fitted_constant);
  const bool ok = r.pairs.size() == 10 && r.violations == 0 && r.all_zero_at_start && r.all_finite;
  return {ok, std::to_string(r.pairs.size()) + " pairs, violations " + std::to_string(r.violations) +
                  ", lhs(0) = 0 " + (r.all_zero_at_start ? "yes" : "no") + ", largest fitted constant " +
                  fmt("%.3f", cmax)};
}

// ---------------------------------------------------------------- 11

Outcome entropy() {
  ex::EntropyCheckConfig c;  // eps {0.4, 0.2, 0.1}, p = 3, 50 spaces of <= 12 points
  c.seed = 11;
  const auto r = ex::run_entropy_check(c);
  std::size_t violations = 0;
  for (const auto& row : r.rows) violations += row.product_violations + row.metric_violations;
  const bool ok = violations == 0 && r.scaling_exponent >= kEntropyExponentLo && r.scaling_exponent <= kEntropyExponentHi;
  return {ok, "violations " + std::to_string(violations) + ", lip1 scaling exponent " + fmt("%.3f", r.scaling_exponent)};
}

// ---------------------------------------------------------------- 12

Outcome gamma_values() {
  using covering::Rational;
  const Rational p4(4);
  const auto a = covering::gamma_first_order(covering::HolderCase{Rational(1)}, p4, 1);
  const auto b = covering::gamma_first_order(covering::HolderCase{Rational(1, 2)}, p4, 1);
  const auto c = covering::gamma_second_order(covering::HolderCase{Rational(3, 4)}, p4, 1);
  const auto d = covering::gamma_second_order(covering::SobolevCase{Rational(3, 2), std::nullopt}, p4, 1);
  bool rejected = false;
  try {
    covering::gamma_second_order(covering::HolderCase{Rational(66, 100)}, p4, 1);
  } catch (const HypothesisViolation& e) {
    rejected = std::string(e.what()).find("greater than 2/3") != std::string::npos;
  }
  const bool ok = a == Rational(1, 5) && b == Rational(1, 14) && c == Rational(9, 50) && d == Rational(3, 10) && rejected;
  return {ok, covering::to_string(a) + ", " + covering::to_string(b) + ", " + covering::to_string(c) + ", " +
                  covering::to_string(d) + "; alpha = 0.66 " + (rejected ? "rejected" : "accepted")};
}

// ---------------------------------------------------------------- 13

Outcome reproducibility() {
  const fs::path root = fs::current_path() / "acceptance_runs";
  fs::remove_all(root);
  const std::vector<std::string> configs{
      R"({"experiment":"chaos-rate","kernel":{"family":"holder_power","alpha":0.5},"N":[32,64,128,256],"seeds":4,
          "rate":{"bootstrap":50,"halving_seeds":1},"seed":13})",
      R"({"experiment":"chaos-rate","kernel":{"family":"sine"},"order":"second","kappa":0.5,"N":[16,32,64,128],
          "seeds":2,"T":0.25,"dt":0.0078125,"phase_grid":{"Gx":64,"Gv":48},"rate":{"bootstrap":20,"halving_seeds":0}})",
      R"({"experiment":"gc-sup","N":[32,64],"seeds":3,"net":{"size":4},"T":0.5})",
      R"({"experiment":"coupling-decomp","kernel":{"family":"sine"},"N":[128],"T":0.5})",
      R"({"experiment":"counterexample","N":[16,32],"seeds":6,"T":1})",
      R"({"experiment":"nonuniqueness","seeds":6,"dt":0.00390625})",
      R"({"experiment":"time-regularity","kernel":{"family":"holder_power","alpha":0.5},"N":[32,64],"seeds":4})",
      R"({"experiment":"ulln-kernel","kernel":{"family":"sine"},"N":[32,64],"seeds":2,"net":{"size":2},
          "ulln":{"reference_n":512}})",
      R"({"experiment":"entropy-check","entropy":{"trials":6}})",
      R"({"experiment":"energy-check","energy":{"pairs":2}})",
      R"({"experiment":"pde-selftest","grid":{"G":256}})",
  };
  std::size_t files = 0, mismatches = 0;
  std::string bad;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto cfg = io::parse_config_text(configs[i]);
    const fs::path dir = root / (std::to_string(i) + "_" + std::string(io::kind_name(cfg.experiment)));
    io::run_experiment(cfg, dir / "first");
    std::ifstream in(dir / "first" / "manifest.json");
    const auto stored = io::manifest_from_json(nlohmann::json::parse(in));
    auto again = io::config_from_json(stored.config);
    again.jobs = 2;
    const auto fresh = io::run_experiment(again, dir / "rerun");
    const auto diff = io::compare_manifests(stored, fresh);
    files += stored.artifacts.size();
    mismatches += diff.size();
    for (const auto& m : diff) bad += " " + dir.filename().string() + "/" + m.file;
  }
  return {mismatches == 0, std::to_string(configs.size()) + " runs, " + std::to_string(files) +
                               " artifacts re-run from manifests, mismatches " + std::to_string(mismatches) + bad};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
  double budget_s;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "transport oracle equivalence", transport_oracle, 10},
      {2, "PDE sanity", pde_sanity, 30},
      {3, "zero-drift exactness", zero_drift_exactness, 60},
      {4, "Hoelder chaos-rate envelope", holder_envelope, 1200},
      {5, "Lipschitz contrast", lipschitz_contrast, 1200},
      {6, "coupling decomposition", coupling, 600},
      {7, "Glivenko-Cantelli sup", glivenko_cantelli, 1800},
      {8, "counterexample separation", counterexample, 900},
      {9, "non-uniqueness demo", nonuniqueness, 300},
      {10, "energy estimate", energy, 600},
      {11, "entropy lemmas", entropy, 600},
      {12, "rate exponents", gamma_values, 10},
      {13, "manifest reproducibility", reproducibility, 600},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = secs <= c.budget_s;
    const bool pass = o.pass && in_budget;
    if (!pass) ++failed;
    std::printf("%s %2d %s: %s; %.1f s (budget %.0f s)%s\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                secs, c.budget_s, in_budget ? "" : " OVER BUDGET");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
