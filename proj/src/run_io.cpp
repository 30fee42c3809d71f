#include "chaoslab/run_io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "chaoslab/digest.hpp"
#include "chaoslab/errors.hpp"
#include "chaoslab/transport.hpp"

namespace chaoslab::io {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct KindName {
  ExperimentKind kind;
  std::string_view name;
};

constexpr KindName kKinds[] = {
    {ExperimentKind::chaos_rate, "chaos-rate"},
    {ExperimentKind::gc_sup, "gc-sup"},
    {ExperimentKind::coupling_decomp, "coupling-decomp"},
    {ExperimentKind::counterexample, "counterexample"},
    {ExperimentKind::nonuniqueness, "nonuniqueness"},
    {ExperimentKind::time_regularity, "time-regularity"},
    {ExperimentKind::ulln_kernel, "ulln-kernel"},
    {ExperimentKind::entropy_check, "entropy-check"},
    {ExperimentKind::energy_check, "energy-check"},
    {ExperimentKind::pde_selftest, "pde-selftest"},
};

}  // namespace

std::string_view kind_name(ExperimentKind kind) {
  for (const auto& k : kKinds)
    if (k.kind == kind) return k.name;
  return "unknown";
}

ExperimentKind parse_kind(std::string_view name) {
  for (const auto& k : kKinds)
    if (k.name == name) return k.kind;
  throw ConfigError("experiment: unknown kind '" + std::string(name) + "'");
}

const std::vector<ExperimentKind>& all_kinds() {
  static const std::vector<ExperimentKind> v = [] {
    std::vector<ExperimentKind> out;
    for (const auto& k : kKinds) out.push_back(k.kind);
    return out;
  }();
  return v;
}

bool kind_needs_kernel(ExperimentKind kind) {
  return kind == ExperimentKind::chaos_rate || kind == ExperimentKind::coupling_decomp ||
         kind == ExperimentKind::time_regularity || kind == ExperimentKind::ulln_kernel;
}

field::Kernel KernelSpec::build() const {
  field::Kernel k = field::Kernel::zero(dim);
  if (family == "zero") {
    k = field::Kernel::zero(dim);
  } else if (family == "constant") {
    Vec v{0.0, 0.0};
    for (std::size_t i = 0; i < value.size() && i < 2; ++i) v[i] = value[i];
    k = field::Kernel::constant(v, dim);
  } else if (family == "sine") {
    k = field::Kernel::sine(dim);
  } else if (family == "linear_capped") {
    k = field::Kernel::linear_capped(radius, dim);
  } else if (family == "clamp_attract") {
    k = field::Kernel::clamp_attract();
  } else if (family == "holder_power") {
    k = field::Kernel::holder_power(alpha, dim, shape == "even" ? field::PowerShape::even : field::PowerShape::odd);
  } else if (family == "sobolev_singular") {
    k = field::Kernel::sobolev_singular(alpha, s, q.value_or(INFINITY), dim);
  } else if (family == "tabulated") {
    k = field::Kernel::tabulated(field::load_kernel_table(table));
  } else {
    throw ConfigError("kernel.family: unknown family '" + family + "'");
  }
  return mollifier > 0.0 ? field::mollify_kernel(k, mollifier) : k;
}

std::optional<covering::GammaCase> KernelSpec::gamma_case() const {
  if (family == "holder_power") return covering::HolderCase{covering::to_rational(alpha)};
  if (family == "sobolev_singular") {
    covering::SobolevCase sc{covering::to_rational(s), std::nullopt};
    if (q) sc.q = covering::to_rational(*q);
    return sc;
  }
  if (family == "sine" || family == "linear_capped" || family == "clamp_attract") {
    return covering::HolderCase{covering::Rational(1)};
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- strict JSON

json parse_json_strict(std::string_view text) {
  // one key set per open object, indexed by depth
  std::vector<std::set<std::string>> keys;
  std::string duplicate;
  json::parser_callback_t cb = [&](int depth, json::parse_event_t event, json& parsed) {
    const auto d = static_cast<std::size_t>(depth);
    if (event == json::parse_event_t::object_start) {
      if (keys.size() <= d + 1) keys.resize(d + 2);
      keys[d + 1].clear();
    } else if (event == json::parse_event_t::key) {
      if (keys.size() <= d) keys.resize(d + 1);
      const auto key = parsed.get<std::string>();
      if (!keys[d].insert(key).second && duplicate.empty()) duplicate = key;
    }
    return true;
  };
  json j;
  try {
    j = json::parse(text.begin(), text.end(), cb);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!duplicate.empty()) throw ConfigError("duplicate key '" + duplicate + "'");
  return j;
}

namespace {


// Typed access to one JSON object with defaults, path-qualified errors and unknown-key detection.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where("") + "must be an object");
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return obj_.contains(key);
  }

  double number(const std::string& key, double def) {
    if (!has(key)) return def;
    const auto& v = obj_.at(key);
    if (!v.is_number()) throw ConfigError(where(key) + "must be a number");
    return v.get<double>();
  }

  std::optional<double> number_or_inf(const std::string& key, std::optional<double> def) {
    if (!has(key)) return def;
    const auto& v = obj_.at(key);
    if (v.is_string() && v.get<std::string>() == "inf") return std::nullopt;
    if (!v.is_number()) throw ConfigError(where(key) + "must be a number or \"inf\"");
    return v.get<double>();
  }

  std::uint64_t count(const std::string& key, std::uint64_t def) {
    if (!has(key)) return def;
    const auto& v = obj_.at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      throw ConfigError(where(key) + "must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool def) {
    if (!has(key)) return def;
    const auto& v = obj_.at(key);
    if (!v.is_boolean()) throw ConfigError(where(key) + "must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& def) {
    if (!has(key)) return def;
    const auto& v = obj_.at(key);
    if (!v.is_string()) throw ConfigError(where(key) + "must be a string");
    return v.get<std::string>();
  }

  template <class T>
  std::vector<T> list(const std::string& key, const std::vector<T>& def) {
    if (!has(key)) return def;
    const auto& v = obj_.at(key);
    if (!v.is_array()) throw ConfigError(where(key) + "must be an array");
    std::vector<T> out;
    for (const auto& e : v) {
      if constexpr (std::is_floating_point_v<T>) {
        if (!e.is_number()) throw ConfigError(where(key) + "entries must be numbers");
      } else {
        if (!e.is_number_integer() || e.get<std::int64_t>() < 0) {
          throw ConfigError(where(key) + "entries must be non-negative integers");
        }
      }
      out.push_back(e.get<T>());
    }
    return out;
  }

  const json* object(const std::string& key) {
    if (!has(key)) return nullptr;
    return &obj_.at(key);
  }

  void finish() const {
    for (const auto& [k, v] : obj_.items()) {
      if (!used_.count(k)) throw ConfigError(where(k) + "unknown key");
    }
  }

  std::string where(const std::string& key) const {
    std::string p = path_.empty() ? key : key.empty() ? path_ : path_ + "." + key;
    return p.empty() ? std::string() : p + ": ";
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> used_;
};

void require(bool ok, const std::string& where, const std::string& what) {
  if (!ok) throw ConfigError(where + what);
}

particles::F0Spec read_f0(const json* j, const std::string& path, particles::F0Spec def) {
  if (!j) return def;
  Reader r(*j, path);
  const auto fam = r.string("family", def.family == particles::F0Family::gaussian      ? "gaussian"
                                      : def.family == particles::F0Family::uniform_box ? "uniform_box"
                                                                                       : "bump");
  if (fam == "gaussian") {
    def.family = particles::F0Family::gaussian;
  } else if (fam == "uniform_box") {
    def.family = particles::F0Family::uniform_box;
  } else if (fam == "bump") {
    def.family = particles::F0Family::bump;
  } else {
    throw ConfigError(r.where("family") + "must be gaussian, uniform_box or bump");
  }
  def.mean = r.number("mean", def.mean);
  def.scale = r.number("scale", def.scale);
  def.moment_order = r.number("moments", def.moment_order);
  require(def.scale > 0.0, r.where("scale"), "scale must be positive");
  require(def.moment_order > 1.0, r.where("moments"), "moment order must exceed 1");
  r.finish();
  return def;
}

json f0_json(const particles::F0Spec& f) {
  const char* name = f.family == particles::F0Family::gaussian      ? "gaussian"
                     : f.family == particles::F0Family::uniform_box ? "uniform_box"
                                                                    : "bump";
  return {{"family", name}, {"mean", f.mean}, {"scale", f.scale}, {"moments", f.moment_order}};
}

json q_json(const std::optional<double>& q) { return q ? json(*q) : json("inf"); }

KernelSpec read_kernel(const json& j) {
  Reader r(j, "kernel");
  KernelSpec k;
  if (!r.has("family")) throw ConfigError("kernel.family: required");
  k.family = r.string("family", k.family);
  static const std::set<std::string> families{"zero",          "constant",     "sine",
                                              "linear_capped", "clamp_attract", "holder_power",
                                              "sobolev_singular", "tabulated"};
  require(families.count(k.family) > 0, r.where("family"), "unknown family '" + k.family + "'");
  k.dim = static_cast<int>(r.count("dim", 1));
  require(k.dim == 1 || k.dim == 2, r.where("dim"), "dim must be 1 or 2");
  k.alpha = r.number("alpha", k.alpha);
  if (k.family == "holder_power" || k.family == "sobolev_singular") {
    require(k.alpha > 0.0 && k.alpha <= 1.0, r.where("alpha"), "alpha must lie in (0,1]");
  }
  k.shape = r.string("shape", k.shape);
  require(k.shape == "odd" || k.shape == "even", r.where("shape"), "shape must be odd or even");
  k.value = r.list<double>("value", k.value);
  require(!k.value.empty() && k.value.size() <= 2, r.where("value"), "value needs 1 or 2 components");
  k.radius = r.number("radius", k.radius);
  require(k.radius > 0.0, r.where("radius"), "radius must be positive");
  k.s = r.number("s", k.s);
  k.q = r.number_or_inf("q", k.q);
  if (k.family == "sobolev_singular") {
    require(k.s > 0.0, r.where("s"), "s must be positive");
    require(!k.q || *k.q > 2.0, r.where("q"), "q must exceed 2");
  }
  k.table = r.string("table", k.table);
  require(k.family != "tabulated" || !k.table.empty(), r.where("table"), "tabulated kernels need a table path");
  k.mollifier = r.number("mollifier", k.mollifier);
  require(k.mollifier >= 0.0, r.where("mollifier"), "mollifier must be non-negative");
  r.finish();
  return k;
}

json kernel_json(const KernelSpec& k) {
  return {{"family", k.family}, {"alpha", k.alpha},       {"shape", k.shape},         {"value", k.value},
          {"radius", k.radius}, {"s", k.s},               {"q", q_json(k.q)},         {"table", k.table},
          {"mollifier", k.mollifier}, {"dim", k.dim}};
}

// Defaults that differ between experiments; explicit keys override them.
void apply_kind_defaults(RunConfig& c) {
  switch (c.experiment) {
    case ExperimentKind::chaos_rate:
      break;
    case ExperimentKind::gc_sup:
      c.seeds = 16;
      break;
    case ExperimentKind::coupling_decomp:
      c.n_list = {512};
      c.seeds = 1;
      break;
    case ExperimentKind::counterexample:
      c.n_list = {16, 64, 256};
      c.seeds = 64;
      c.dt = 1.0 / 256.0;
      c.horizon = 4.0;
      break;
    case ExperimentKind::nonuniqueness:
      c.seeds = 50;
      c.dt = 1.0 / 1024.0;
      c.horizon = 2.0;
      break;
    case ExperimentKind::time_regularity:
      c.seeds = 16;
      c.dt = 1.0 / 256.0;
      break;
    case ExperimentKind::ulln_kernel:
      c.n_list = {64, 128, 256, 512};
      c.seeds = 16;
      c.dt = 1.0 / 128.0;
      c.time_stride = 8;
      break;
    case ExperimentKind::entropy_check:
      c.seeds = 1;
      break;
    case ExperimentKind::energy_check:
      c.seeds = 1;
      c.dt = 1.0 / 256.0;
      c.net.size = 16;
      break;
    case ExperimentKind::pde_selftest:
      c.seeds = 1;
      c.f0.scale = 0.5;
      break;
  }
}

}  // namespace

RunConfig config_from_json(const json& j) {
  Reader r(j, "");
  RunConfig c;
  if (!r.has("experiment")) throw ConfigError("experiment: required");
  c.experiment = parse_kind(r.string("experiment", ""));
  apply_kind_defaults(c);
  if (const json* k = r.object("kernel")) c.kernel = read_kernel(*k);
  if (kind_needs_kernel(c.experiment) && !c.kernel) {
    throw ConfigError("kernel: required for experiment " + std::string(kind_name(c.experiment)));
  }
  c.order = r.string("order", c.order);
  require(c.order == "first" || c.order == "second", "order: ", "must be first or second");
  c.f0 = read_f0(r.object("f0"), "f0", c.f0);
  c.velocity = read_f0(r.object("velocity"), "velocity", c.velocity);
  c.kappa = r.number("kappa", c.kappa);
  require(c.kappa >= 0.0, "kappa: ", "must be non-negative");
  c.n_list = r.list<std::size_t>("N", c.n_list);
  require(!c.n_list.empty(), "N: ", "must be non-empty");
  for (std::size_t i = 0; i < c.n_list.size(); ++i) {
    require(c.n_list[i] >= 1, "N: ", "entries must be positive");
    require(i == 0 || c.n_list[i] > c.n_list[i - 1], "N: ", "must be strictly increasing");
  }
  c.seeds = r.count("seeds", c.seeds);
  require(c.seeds >= 1, "seeds: ", "must be at least 1");
  c.seed = r.count("seed", c.seed);
  c.dt = r.number("dt", c.dt);
  require(c.dt > 0.0, "dt: ", "must be positive");
  c.horizon = r.number("T", c.horizon);
  require(c.horizon > 0.0, "T: ", "must be positive");
  const double ratio = c.horizon / c.dt;
  require(std::abs(ratio - std::round(ratio)) <= 1e-9 * std::max(1.0, ratio), "dt: ", "T must be a whole number of steps");

  if (const json* g = r.object("grid")) {
    Reader gr(*g, "grid");
    c.grid.half_width = gr.number("L", c.grid.half_width);
    c.grid.cells = static_cast<int>(gr.count("G", static_cast<std::uint64_t>(c.grid.cells)));
    require(c.grid.half_width > 0.0, gr.where("L"), "must be positive");
    require(c.grid.cells >= 2, gr.where("G"), "must be at least 2");
    gr.finish();
  }
  if (const json* g = r.object("phase_grid")) {
    Reader gr(*g, "phase_grid");
    auto& p = c.phase_grid;
    p.half_width_x = gr.number("Lx", p.half_width_x);
    p.half_width_v = gr.number("Lv", p.half_width_v);
    p.cells_x = static_cast<int>(gr.count("Gx", static_cast<std::uint64_t>(p.cells_x)));
    p.cells_v = static_cast<int>(gr.count("Gv", static_cast<std::uint64_t>(p.cells_v)));
    require(p.half_width_x > 0.0 && p.half_width_v > 0.0, gr.where(""), "half widths must be positive");
    require(p.cells_x >= 2 && p.cells_v >= 2, gr.where(""), "cell counts must be at least 2");
    gr.finish();
  }
  if (const json* m = r.object("metric")) {
    Reader mr(*m, "metric");
    c.c = mr.number("c", c.c);
    c.atom_budget = mr.count("atom_budget", c.atom_budget);
    c.time_stride = mr.count("time_stride", c.time_stride);
    require(c.c >= 0.0, mr.where("c"), "must be non-negative");
    require(c.atom_budget >= 1, mr.where("atom_budget"), "must be positive");
    require(c.time_stride >= 1, mr.where("time_stride"), "must be positive");
    mr.finish();
  }
  if (const json* m = r.object("rate")) {
    Reader rr(*m, "rate");
    c.halving_seeds = rr.count("halving_seeds", c.halving_seeds);
    c.bootstrap = rr.count("bootstrap", c.bootstrap);
    c.moment_p = rr.number("moment_p", c.moment_p);
    c.self_interaction = rr.boolean("self_interaction", c.self_interaction);
    require(c.moment_p > 1.0, rr.where("moment_p"), "must exceed 1");
    rr.finish();
  }
  if (const json* m = r.object("net")) {
    Reader nr(*m, "net");
    c.net.alpha = nr.number("alpha", c.net.alpha);
    c.net.radius = nr.number("C", c.net.radius);
    c.net.size = nr.count("size", c.net.size);
    c.net.modes = static_cast<int>(nr.count("modes", static_cast<std::uint64_t>(c.net.modes)));
    c.net.frequency_cap = nr.number("frequency_cap", c.net.frequency_cap);
    require(c.net.alpha > 0.0 && c.net.alpha <= 1.0, nr.where("alpha"), "alpha must lie in (0,1]");
    require(c.net.radius > 0.0, nr.where("C"), "must be positive");
    require(c.net.size >= 1, nr.where("size"), "must be at least 1");
    require(c.net.modes >= 1, nr.where("modes"), "must be at least 1");
    require(c.net.frequency_cap >= 1.0, nr.where("frequency_cap"), "must be at least 1");
    nr.finish();
  }
  if (const json* m = r.object("counterexample")) {
    Reader cr(*m, "counterexample");
    c.g_width = cr.number("g_width", c.g_width);
    c.unsuppressed_target = cr.number("unsuppressed_target", c.unsuppressed_target);
    c.pilot_seeds = cr.count("pilot_seeds", c.pilot_seeds);
    require(c.g_width > 0.0, cr.where("g_width"), "must be positive");
    require(c.unsuppressed_target > 0.0 && c.unsuppressed_target < 1.0, cr.where("unsuppressed_target"),
            "must lie in (0,1)");
    require(c.pilot_seeds >= 1, cr.where("pilot_seeds"), "must be positive");
    cr.finish();
  }
  if (const json* m = r.object("nonuniqueness")) {
    Reader nr(*m, "nonuniqueness");
    c.nonuniqueness_alpha = nr.number("alpha", c.nonuniqueness_alpha);
    const auto lv = nr.list<std::size_t>("levels", {});
    if (!lv.empty() || nr.has("levels")) c.levels.assign(lv.begin(), lv.end());
    c.gap_threshold = nr.number("gap_threshold", c.gap_threshold);
    require(c.nonuniqueness_alpha > 0.0 && c.nonuniqueness_alpha <= 1.0, nr.where("alpha"), "alpha must lie in (0,1]");
    require(!c.levels.empty(), nr.where("levels"), "must be non-empty");
    for (int l : c.levels) require(l >= 1, nr.where("levels"), "entries must be positive");
    nr.finish();
  }
  if (const json* m = r.object("entropy")) {
    Reader er(*m, "entropy");
    c.eps = er.list<double>("eps", c.eps);
    c.lip1_half_width = er.number("half_width", c.lip1_half_width);
    c.weight_p = er.number("p", c.weight_p);
    c.trials = er.count("trials", c.trials);
    c.entropy_alpha = er.number("alpha", c.entropy_alpha);
    require(c.entropy_alpha > 0.0 && c.entropy_alpha <= 1.0, er.where("alpha"), "alpha must lie in (0,1]");
    require(c.eps.size() >= 2, er.where("eps"), "needs at least two values");
    for (double e : c.eps) require(e > 0.0, er.where("eps"), "entries must be positive");
    require(c.lip1_half_width > 0.0, er.where("half_width"), "must be positive");
    require(c.weight_p > 1.0, er.where("p"), "must exceed 1");
    er.finish();
  }
  if (const json* m = r.object("energy")) {
    Reader er(*m, "energy");
    c.pairs = er.count("pairs", c.pairs);
    c.energy_r = er.number("r", c.energy_r);
    c.energy_q = er.number_or_inf("q", c.energy_q);
    require(!c.energy_q || *c.energy_q > 2.0, er.where("q"), "q must exceed 2");
    er.finish();
  }
  if (const json* m = r.object("ulln")) {
    Reader ur(*m, "ulln");
    c.reference_n = ur.count("reference_n", c.reference_n);
    c.ulln_r = ur.number("r", c.ulln_r);
    const auto q = ur.number_or_inf("q", std::optional<double>(c.ulln_q_infinite ? INFINITY : 2.0));
    require(!q || *q == 2.0, ur.where("q"), "q must be 2 or \"inf\"");
    c.ulln_q_infinite = !q;
    require(c.reference_n >= 1, ur.where("reference_n"), "must be positive");
    ur.finish();
  }
  if (const json* m = r.object("time_regularity")) {
    Reader tr(*m, "time_regularity");
    c.a_scan = tr.list<double>("a_scan", c.a_scan);
    tr.finish();
  }
  c.output_dir = r.string("output_dir", c.output_dir);
  c.jobs = r.count("jobs", c.jobs);
  require(c.jobs >= 1, "jobs: ", "must be positive");
  r.finish();
  return c;
}

json config_to_json(const RunConfig& c) {
  json j;
  j["experiment"] = kind_name(c.experiment);
  if (c.kernel) j["kernel"] = kernel_json(*c.kernel);
  j["order"] = c.order;
  j["f0"] = f0_json(c.f0);
  j["velocity"] = f0_json(c.velocity);
  j["kappa"] = c.kappa;
  j["N"] = c.n_list;
  j["seeds"] = c.seeds;
  j["seed"] = c.seed;
  j["dt"] = c.dt;
  j["T"] = c.horizon;
  j["grid"] = {{"L", c.grid.half_width}, {"G", c.grid.cells}};
  j["phase_grid"] = {{"Lx", c.phase_grid.half_width_x},
                     {"Lv", c.phase_grid.half_width_v},
                     {"Gx", c.phase_grid.cells_x},
                     {"Gv", c.phase_grid.cells_v}};
  j["metric"] = {{"c", c.c}, {"atom_budget", c.atom_budget}, {"time_stride", c.time_stride}};
  j["rate"] = {{"halving_seeds", c.halving_seeds},
               {"bootstrap", c.bootstrap},
               {"moment_p", c.moment_p},
               {"self_interaction", c.self_interaction}};
  j["net"] = {{"alpha", c.net.alpha},
              {"C", c.net.radius},
              {"size", c.net.size},
              {"modes", c.net.modes},
              {"frequency_cap", c.net.frequency_cap}};
  j["counterexample"] = {
      {"g_width", c.g_width}, {"unsuppressed_target", c.unsuppressed_target}, {"pilot_seeds", c.pilot_seeds}};
  j["nonuniqueness"] = {{"alpha", c.nonuniqueness_alpha}, {"levels", c.levels}, {"gap_threshold", c.gap_threshold}};
  j["entropy"] = {{"eps", c.eps}, {"half_width", c.lip1_half_width}, {"p", c.weight_p}, {"trials", c.trials}, {"alpha", c.entropy_alpha}};
  j["energy"] = {{"pairs", c.pairs}, {"r", c.energy_r}, {"q", q_json(c.energy_q)}};
  j["ulln"] = {{"reference_n", c.reference_n},
               {"r", c.ulln_r},
               {"q", c.ulln_q_infinite ? json("inf") : json(2.0)}};
  j["time_regularity"] = {{"a_scan", c.a_scan}};
  j["output_dir"] = c.output_dir;
  j["jobs"] = c.jobs;
  return j;
}

RunConfig parse_config_text(std::string_view text) { return config_from_json(parse_json_strict(text)); }

RunConfig parse_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return parse_config_text(s.str());
}

std::string config_hash(const RunConfig& config) {
  // jobs and output_dir do not change results
  auto j = config_to_json(config);
  j.erase("jobs");
  j.erase("output_dir");
  return sha256_hex(j.dump());
}

std::size_t subrun_count(const RunConfig& c) {
  const std::size_t grid = c.n_list.size() * c.seeds;
  switch (c.experiment) {
    case ExperimentKind::chaos_rate:
      return grid + c.n_list.size() * std::min(c.halving_seeds, c.seeds);
    case ExperimentKind::gc_sup:
      return grid * c.net.size;
    case ExperimentKind::coupling_decomp:
      return 1;
    case ExperimentKind::counterexample:
      return 2 * grid;
    case ExperimentKind::nonuniqueness:
      return c.levels.size() * c.seeds;
    case ExperimentKind::time_regularity:
      return grid;
    case ExperimentKind::ulln_kernel:
      return grid * c.net.size;
    case ExperimentKind::entropy_check:
      return c.eps.size() * c.trials;
    case ExperimentKind::energy_check:
      return c.pairs;
    case ExperimentKind::pde_selftest:
      return 4;
  }
  return 0;
}

// ---------------------------------------------------------------- CSV

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
  if (header.empty()) throw InvalidArgument("CSV needs at least one column");
  row(header);
  rows_ = 0;
}

CsvWriter& CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw InvalidArgument("CSV row has the wrong number of cells");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].find_first_of(",\n\"") != std::string::npos) throw InvalidArgument("CSV cell needs quoting");
    if (i) text_ += ',';
    text_ += cells[i];
  }
  text_ += '\n';
  ++rows_;
  return *this;
}

std::string CsvWriter::str() const { return text_; }

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

// ---------------------------------------------------------------- plots

namespace {

std::string fx(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

constexpr double kWidth = 640, kHeight = 420, kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;

}  // namespace

std::string render_svg(const PlotSpec& spec) {
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << fx(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
    << escape(spec.title) << "</text>\n";
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;

  if (spec.kind == PlotKind::heatmap) {
    if (spec.heat_columns <= 0 || spec.heat_rows <= 0 ||
        spec.heat.size() != static_cast<std::size_t>(spec.heat_columns) * spec.heat_rows) {
      throw InvalidArgument("heatmap needs a non-empty value grid of matching shape");
    }
    const auto [lo_it, hi_it] = std::minmax_element(spec.heat.begin(), spec.heat.end());
    const double lo = *lo_it, span = *hi_it - *lo_it;
    const double cw = pw / spec.heat_columns, ch = ph / spec.heat_rows;
    for (int r = 0; r < spec.heat_rows; ++r) {
      for (int c = 0; c < spec.heat_columns; ++c) {
        const double v = spec.heat[static_cast<std::size_t>(r) * spec.heat_columns + c];
        const double u = span > 0 ? (v - lo) / span : 1.0;
        const int red = static_cast<int>(std::lround(255 * u)), blue = static_cast<int>(std::lround(255 * (1 - u)));
        o << "<rect x=\"" << fx(kLeft + c * cw) << "\" y=\"" << fx(kTop + (spec.heat_rows - 1 - r) * ch) << "\" width=\""
          << fx(cw) << "\" height=\"" << fx(ch) << "\" fill=\"rgb(" << red << ",64," << blue << ")\"/>\n";
      }
    }
  } else {
    const bool log = spec.kind == PlotKind::loglog;
    std::vector<Series> ss;
    for (const auto& s : spec.series) {
      if (s.x.size() != s.y.size()) throw InvalidArgument("plot series has mismatched lengths");
      Series t{s.label, {}, {}};
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        if (log && (s.x[i] <= 0 || s.y[i] <= 0)) continue;
        t.x.push_back(log ? std::log10(s.x[i]) : s.x[i]);
        t.y.push_back(log ? std::log10(s.y[i]) : s.y[i]);
      }
      ss.push_back(std::move(t));
    }
    if (ss.empty() || std::all_of(ss.begin(), ss.end(), [](const Series& s) { return s.x.empty(); })) {
      throw InvalidArgument("plot needs a non-empty series");
    }
    // reference line y = y0 (x / x0)^(-gamma) in log space
    std::optional<Series> ref;
    if (log && spec.gamma_reference && !ss.front().x.empty()) {
      const auto& f = ss.front();
      ref = Series{"reference", {f.x.front(), f.x.back()},
                   {f.y.front(), f.y.front() - *spec.gamma_reference * (f.x.back() - f.x.front())}};
    }
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    auto extend = [&](const Series& s) {
      for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
      for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
    };
    for (const auto& s : ss) extend(s);
    if (ref) extend(*ref);
    if (x1 - x0 <= 0) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 <= 0) y0 -= 0.5, y1 += 0.5;
    const double padx = 0.04 * (x1 - x0), pady = 0.06 * (y1 - y0);
    x0 -= padx, x1 += padx, y0 -= pady, y1 += pady;
    auto X = [&](double v) { return kLeft + (v - x0) / (x1 - x0) * pw; };
    auto Y = [&](double v) { return kTop + ph - (v - y0) / (y1 - y0) * ph; };

    o << "<rect x=\"" << fx(kLeft) << "\" y=\"" << fx(kTop) << "\" width=\"" << fx(pw) << "\" height=\"" << fx(ph)
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
      const double vx = x0 + (x1 - x0) * k / 4.0, vy = y0 + (y1 - y0) * k / 4.0;
      o << "<text x=\"" << fx(X(vx)) << "\" y=\"" << fx(kTop + ph + 16)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << tick(log ? std::pow(10.0, vx) : vx) << "</text>\n";
      o << "<text x=\"" << fx(kLeft - 6) << "\" y=\"" << fx(Y(vy) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << tick(log ? std::pow(10.0, vy) : vy)
        << "</text>\n";
    }
    o << "<text x=\"" << fx(kLeft + pw / 2) << "\" y=\"" << fx(kHeight - 12)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape(spec.x_label) << "</text>\n";
    o << "<text x=\"16\" y=\"" << fx(kTop + ph / 2) << "\" transform=\"rotate(-90 16 " << fx(kTop + ph / 2)
      << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape(spec.y_label)
      << "</text>\n";

    auto polyline = [&](const Series& s, const char* colour, bool dashed) {
      if (s.x.empty()) return;
      o << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\"" << (dashed ? " stroke-dasharray=\"6 4\"" : "")
        << " points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) o << (i ? " " : "") << fx(X(s.x[i])) << ',' << fx(Y(s.y[i]));
      o << "\"/>\n";
      if (log) {
        for (std::size_t i = 0; i < s.x.size() && !dashed; ++i)
          o << "<circle cx=\"" << fx(X(s.x[i])) << "\" cy=\"" << fx(Y(s.y[i])) << "\" r=\"2.5\" fill=\"" << colour << "\"/>\n";
      }
    };
    for (std::size_t i = 0; i < ss.size(); ++i) polyline(ss[i], kPalette[i % 7], false);
    if (ref) polyline(*ref, "#555555", true);

    double ly = kTop + 16;
    for (std::size_t i = 0; i < ss.size(); ++i, ly += 16) {
      o << "<text x=\"" << fx(kLeft + pw - 8) << "\" y=\"" << fx(ly) << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\""
        << kPalette[i % 7] << "\">" << escape(ss[i].label) << "</text>\n";
    }
    if (log && ss.front().x.size() >= 2) {
      std::vector<double> xs, ys;
      for (double v : ss.front().x) xs.push_back(std::pow(10.0, v));
      for (double v : ss.front().y) ys.push_back(std::pow(10.0, v));
      const auto fit = experiments::fit_loglog(xs, ys);
      o << "<text x=\"" << fx(kLeft + 8) << "\" y=\"" << fx(kTop + ph - 10)
        << "\" font-family=\"sans-serif\" font-size=\"12\">slope " << fx(fit.slope) << "</text>\n";
    }
    if (ref) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "reference slope -%.4f", *spec.gamma_reference);
      o << "<text x=\"" << fx(kLeft + 8) << "\" y=\"" << fx(kTop + ph - 26)
        << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#555555\">" << buf << "</text>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

void emit_plot(const PlotSpec& spec, const fs::path& path) { write_file_atomic(path, render_svg(spec)); }

// ---------------------------------------------------------------- manifests

std::string content_digest(std::string_view text, const std::vector<std::string>& volatile_columns) {
  if (volatile_columns.empty()) return sha256_hex(text);
  std::string out;
  std::vector<bool> blank;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    std::vector<std::string_view> cells;
    std::size_t a = 0;
    for (;;) {
      const std::size_t b = line.find(',', a);
      cells.push_back(line.substr(a, b == std::string_view::npos ? line.size() - a : b - a));
      if (b == std::string_view::npos) break;
      a = b + 1;
    }
    const bool is_header = header;
    if (header) {
      for (auto c : cells)
        blank.push_back(std::find(volatile_columns.begin(), volatile_columns.end(), c) != volatile_columns.end());
      header = false;
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      if (is_header || !(i < blank.size() && blank[i])) out += cells[i];
    }
    out += '\n';
    pos = end + 1;
  }
  return sha256_hex(out);
}

json manifest_to_json(const RunManifest& m) {
  json arts = json::array();
  for (const auto& a : m.artifacts) arts.push_back({{"file", a.file}, {"sha256", a.sha256}, {"volatile_columns", a.volatile_columns}});
  return {{"config_hash", m.config_hash}, {"config", m.config},     {"code_version", m.code_version},
          {"master_seed", m.master_seed}, {"seeds", m.seeds},       {"started", m.started},
          {"finished", m.finished},       {"artifacts", arts}};
}

RunManifest manifest_from_json(const json& j) {
  if (!is_manifest(j)) throw ConfigError("not a run manifest");
  RunManifest m;
  try {
    m.config_hash = j.at("config_hash").get<std::string>();
    m.config = j.at("config");
    m.code_version = j.value("code_version", "");
    m.master_seed = j.value("master_seed", std::uint64_t{0});
    m.seeds = j.value("seeds", json::object());
    m.started = j.value("started", "");
    m.finished = j.value("finished", "");
    for (const auto& a : j.at("artifacts")) {
      m.artifacts.push_back({a.at("file").get<std::string>(), a.at("sha256").get<std::string>(),
                             a.value("volatile_columns", std::vector<std::string>{})});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

bool is_manifest(const json& j) {
  return j.is_object() && j.contains("config_hash") && j.contains("artifacts") && j.contains("config");
}

std::string code_version() { return "chaoslab-1.0.0"; }

std::vector<DigestMismatch> compare_manifests(const RunManifest& stored, const RunManifest& fresh) {
  std::vector<DigestMismatch> out;
  std::map<std::string, std::string> now;
  for (const auto& a : fresh.artifacts) now[a.file] = a.sha256;
  for (const auto& a : stored.artifacts) {
    const auto it = now.find(a.file);
    const std::string actual = it == now.end() ? "missing" : it->second;
    if (actual != a.sha256) out.push_back({a.file, a.sha256, actual});
  }
  if (stored.config_hash != fresh.config_hash) out.push_back({"config", stored.config_hash, fresh.config_hash});
  return out;
}

}  // namespace chaoslab::io
