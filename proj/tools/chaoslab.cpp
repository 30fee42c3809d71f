#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "chaoslab/errors.hpp"
#include "chaoslab/run_io.hpp"

namespace io = chaoslab::io;
using nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::string kernel;
  std::optional<double> alpha;
  std::vector<double> eps;
  bool dry_run = false;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw chaoslab::ConfigError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int verify_manifest(const json& stored_json, const Options& opt) {
  const auto stored = io::manifest_from_json(stored_json);
  auto config = io::config_from_json(stored.config);
  if (opt.jobs) config.jobs = *opt.jobs;
  const std::string out = opt.out.empty() ? config.output_dir + "/rerun" : opt.out;
  const auto fresh = io::run_experiment(config, out);
  const auto mismatches = io::compare_manifests(stored, fresh);
  for (const auto& m : mismatches)
    std::cerr << "digest mismatch: " << m.file << " expected " << m.expected << " got " << m.actual << "\n";
  if (!mismatches.empty()) return 2;
  std::cout << "all " << stored.artifacts.size() << " artifact digests match\n";
  return 0;
}

int run(const std::string& kind, const Options& opt) {
  json j = json::object();
  if (!opt.config.empty()) {
    j = io::parse_json_strict(slurp(opt.config));
    if (io::is_manifest(j)) return verify_manifest(j, opt);
    if (!j.is_object()) throw chaoslab::ConfigError("config must be a JSON object");
  }
  if (!j.contains("experiment")) j["experiment"] = kind;
  if (j["experiment"] != kind) {
    throw chaoslab::ConfigError("experiment: config is for " + j["experiment"].dump() + ", not " + kind);
  }
  if (!opt.kernel.empty()) {
    j["kernel"] = json{{"family", opt.kernel}};
    if (opt.alpha) j["kernel"]["alpha"] = *opt.alpha;
  }
  if (opt.seed) j["seed"] = *opt.seed;
  if (opt.jobs) j["jobs"] = *opt.jobs;
  if (!opt.out.empty()) j["output_dir"] = opt.out;
  if (!opt.eps.empty()) j["entropy"]["eps"] = opt.eps;

  const auto config = io::config_from_json(j);
  if (opt.dry_run) {
    std::cout << io::config_to_json(config).dump(2) << "\n";
    std::cout << "sub-runs: " << io::subrun_count(config) << "\n";
    return 0;
  }
  const auto manifest = io::run_experiment(config, config.output_dir);
  std::cout << "wrote " << manifest.artifacts.size() << " artifacts and manifest.json to " << config.output_dir
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chaoslab: propagation-of-chaos experiments"};
  app.require_subcommand(1);
  Options opt;
  std::string chosen;

  for (auto kind : io::all_kinds()) {
    const std::string name(io::kind_name(kind));
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", opt.config, "JSON config, or a manifest to re-run and verify")->envname("CHAOSLAB_CONFIG");
    sub->add_option("--out", opt.out, "output directory")->envname("CHAOSLAB_OUT");
    sub->add_option("--seed", opt.seed, "master seed")->envname("CHAOSLAB_SEED");
    sub->add_option("--jobs", opt.jobs, "worker threads")->envname("CHAOSLAB_JOBS");
    sub->add_flag("--dry-run", opt.dry_run, "print the resolved config and sub-run count, write nothing");
    if (io::kind_needs_kernel(kind)) {
      sub->add_option("--kernel", opt.kernel, "kernel family (overrides the config)");
      sub->add_option("--alpha", opt.alpha, "kernel exponent, with --kernel");
    }
    if (kind == io::ExperimentKind::entropy_check) {
      sub->add_option("--eps", opt.eps, "covering scales")->delimiter(',');
    }
    sub->callback([&chosen, name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    return run(chosen, opt);
  } catch (const chaoslab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
