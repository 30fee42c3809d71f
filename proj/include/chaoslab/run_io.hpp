#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "chaoslab/experiments.hpp"
#include "chaoslab/kernel.hpp"
#include "chaoslab/particles.hpp"

namespace chaoslab::io {

enum class ExperimentKind {
  chaos_rate,
  gc_sup,
  coupling_decomp,
  counterexample,
  nonuniqueness,
  time_regularity,
  ulln_kernel,
  entropy_check,
  energy_check,
  pde_selftest,
};

std::string_view kind_name(ExperimentKind kind);
/// ConfigError on an unknown name.
ExperimentKind parse_kind(std::string_view name);
const std::vector<ExperimentKind>& all_kinds();
/// Whether the kind reads a kernel from the configuration.
bool kind_needs_kernel(ExperimentKind kind);

struct KernelSpec {
  std::string family = "zero";  // zero, constant, sine, linear_capped, clamp_attract, holder_power,
                                // sobolev_singular, tabulated
  double alpha = 0.5;
  std::string shape = "odd";
  std::vector<double> value{0.0};
  double radius = 1.0;
  double s = 0.5;
  std::optional<double> q;  // nullopt = infinity
  std::string table;
  double mollifier = 0.0;
  int dim = 1;

  field::Kernel build() const;
  /// Rate-formula case carried by the kernel, if it has one.
  std::optional<covering::GammaCase> gamma_case() const;
};

struct NetSpec {
  double alpha = 0.75;
  double radius = 1.0;
  std::size_t size = 8;
  int modes = 2;
  double frequency_cap = 8.0;
};

struct RunConfig {
  ExperimentKind experiment = ExperimentKind::chaos_rate;
  std::optional<KernelSpec> kernel;
  std::string order = "first";
  particles::F0Spec f0{};
  particles::F0Spec velocity{};
  double kappa = 0.0;
  std::vector<std::size_t> n_list{128, 256, 512, 1024};
  std::size_t seeds = 32;
  std::uint64_t seed = 0;
  double dt = 1.0 / 512.0;
  double horizon = 1.0;
  experiments::GridSpec grid{};
  experiments::PhaseGridSpec phase_grid{};
  double c = 1.0;
  std::size_t atom_budget = 2048;
  std::size_t time_stride = 1;
  std::size_t halving_seeds = 4;
  std::size_t bootstrap = 200;
  double moment_p = 4.0;
  bool self_interaction = true;
  NetSpec net{};
  // experiment-specific
  double g_width = 0.1;
  double unsuppressed_target = 0.75;
  std::size_t pilot_seeds = 8;
  double nonuniqueness_alpha = 0.5;
  std::vector<int> levels{4, 8, 16};
  double gap_threshold = 0.5;
  std::vector<double> eps{0.4, 0.2, 0.1};
  double lip1_half_width = 2.0;
  double weight_p = 3.0;
  std::size_t trials = 50;
  double entropy_alpha = 0.5;
  std::size_t pairs = 10;
  double energy_r = 2.0;
  std::optional<double> energy_q = 4.0;  // nullopt = infinity
  std::size_t reference_n = 8192;
  double ulln_r = 1.0;
  bool ulln_q_infinite = false;
  std::vector<double> a_scan;
  std::string output_dir = "out";
  std::size_t jobs = 1;
};

/// Parse JSON text: rejects duplicate and unknown keys, applies defaults, validates.
RunConfig parse_config_text(std::string_view text);
RunConfig parse_config_file(const std::filesystem::path& path);
RunConfig config_from_json(const nlohmann::json& j);
/// Every field, resolved; parse(serialize(c)) == serialize(c).
nlohmann::json config_to_json(const RunConfig& config);
/// SHA-256 of the canonical (sorted-key, compact) dump; independent of key order in the source.
std::string config_hash(const RunConfig& config);
/// Number of independent sub-runs the experiment will execute.
std::size_t subrun_count(const RunConfig& config);

/// Parse JSON text, throwing ConfigError on syntax errors or duplicate keys.
nlohmann::json parse_json_strict(std::string_view text);

// ---------------------------------------------------------------- CSV

/// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite values.
std::string format_double(double x);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  CsvWriter& row(const std::vector<std::string>& cells);
  std::string str() const;
  std::size_t rows() const noexcept { return rows_; }

 private:
  std::size_t columns_;
  std::string text_;
  std::size_t rows_ = 0;
};

/// Write via a temporary file in the same directory and rename into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// ---------------------------------------------------------------- plots

enum class PlotKind { loglog, lines, heatmap };

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  PlotKind kind = PlotKind::lines;
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;               // loglog, lines
  std::optional<double> gamma_reference;    // loglog: line of slope -gamma through the first point
  std::vector<double> heat;                 // heatmap values, row-major
  int heat_columns = 0;
  int heat_rows = 0;
};

/// Deterministic standalone SVG. Log-log plots annotate the fitted slope of the first series.
std::string render_svg(const PlotSpec& spec);
void emit_plot(const PlotSpec& spec, const std::filesystem::path& path);

// ---------------------------------------------------------------- manifests

struct Artifact {
  std::string file;
  std::string sha256;
  std::vector<std::string> volatile_columns;  // blanked before hashing
};

struct RunManifest {
  std::string config_hash;
  nlohmann::json config;
  std::string code_version;
  std::uint64_t master_seed = 0;
  nlohmann::json seeds;
  std::string started;
  std::string finished;
  std::vector<Artifact> artifacts;
};

/// SHA-256 of CSV text with the named columns emptied; other files hash verbatim.
std::string content_digest(std::string_view text, const std::vector<std::string>& volatile_columns);

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);
bool is_manifest(const nlohmann::json& j);

std::string code_version();

struct DigestMismatch {
  std::string file;
  std::string expected;
  std::string actual;
};

/// Run the configured experiment, write its artifacts and manifest.json into `out`.
RunManifest run_experiment(const RunConfig& config, const std::filesystem::path& out);

/// Compare a fresh manifest against a stored one; empty result means every digest matched.
std::vector<DigestMismatch> compare_manifests(const RunManifest& stored, const RunManifest& fresh);

}  // namespace chaoslab::io
