#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "chaoslab/digest.hpp"
#include "chaoslab/errors.hpp"
#include "chaoslab/run_io.hpp"

using namespace chaoslab;
using namespace chaoslab::io;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

fs::path scratch_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("chaoslab_test_" + name);
  fs::remove_all(p);
  return p;
}

void collect_keys(const json& j, const std::string& prefix, std::set<std::string>& out) {
  for (const auto& [k, v] : j.items()) {
    out.insert(prefix + k);
    if (v.is_object()) collect_keys(v, prefix + k + ".", out);
  }
}

void collect_schema_keys(const json& j, const std::string& prefix, std::set<std::string>& out) {
  for (const auto& [k, v] : j.at("properties").items()) {
    out.insert(prefix + k);
    if (v.contains("properties")) collect_schema_keys(v, prefix + k + ".", out);
  }
}

}  // namespace

TEST_CASE("minimal config resolves documented defaults") {
  const auto c = parse_config_text(R"({"experiment":"chaos-rate","kernel":{"family":"sine"}})");
  CHECK(c.experiment == ExperimentKind::chaos_rate);
  CHECK(c.order == "first");
  CHECK(c.n_list == std::vector<std::size_t>{128, 256, 512, 1024});
  CHECK(c.seeds == 32);
  CHECK(c.dt == 1.0 / 512.0);
  CHECK(c.horizon == 1.0);
  CHECK(c.grid.cells == 512);
  CHECK(c.c == 1.0);
  CHECK(c.jobs == 1);
  CHECK(c.kernel->family == "sine");

  const auto ce = parse_config_text(R"({"experiment":"counterexample"})");
  CHECK(ce.n_list == std::vector<std::size_t>{16, 64, 256});
  CHECK(ce.seeds == 64);
  CHECK(ce.horizon == 4.0);
}

TEST_CASE("invalid values are rejected with the key and constraint") {
  const auto msg = error_of(R"({"experiment":"chaos-rate","kernel":{"family":"holder_power","alpha":1.5}})");
  CHECK(msg.find("kernel.alpha") != std::string::npos);
  CHECK(msg.find("(0,1]") != std::string::npos);

  CHECK(error_of(R"({"experiment":"chaos-rate"})").find("kernel") != std::string::npos);
  CHECK(error_of(R"({"experiment":"chaos-rate","kernel":{"family":"sine"},"seeds":0})").find("seeds") !=
        std::string::npos);
  CHECK(error_of(R"({"experiment":"gc-sup","N":[256,128]})").find("N:") != std::string::npos);
  CHECK(error_of(R"({"experiment":"gc-sup","dt":0.3})").find("dt") != std::string::npos);
  CHECK(error_of(R"({"experiment":"gc-sup","mystery":1})").find("mystery: unknown key") != std::string::npos);
  CHECK(error_of(R"({"experiment":"gc-sup","grid":{"L":8,"H":3}})").find("grid.H") != std::string::npos);
  CHECK(error_of(R"({"experiment":"warp-drive"})").find("warp-drive") != std::string::npos);
  CHECK(error_of(R"({"experiment":"gc-sup","seeds":-3})").find("seeds") != std::string::npos);
  CHECK(error_of(R"({"experiment":"gc-sup","seeds":2.5})").find("seeds") != std::string::npos);
  CHECK(error_of(R"({"experiment":"gc-sup",)").find("JSON") != std::string::npos);
}

TEST_CASE("duplicate keys are rejected at any depth") {
  CHECK(error_of(R"({"experiment":"gc-sup","seed":1,"seed":2})").find("duplicate key 'seed'") !=
        std::string::npos);
  CHECK(error_of(R"({"experiment":"gc-sup","grid":{"L":4,"L":5}})").find("duplicate key 'L'") !=
        std::string::npos);
  // the same key in sibling objects is fine
  CHECK(error_of(R"({"experiment":"gc-sup","grid":{"L":4},"entropy":{"half_width":2,"p":3},"energy":{"r":2}})")
            .empty());
}

TEST_CASE("config round-trips through its canonical form") {
  const std::string text = R"({"experiment":"chaos-rate","kernel":{"family":"sobolev_singular","alpha":0.3,
      "s":0.9,"q":"inf"},"order":"second","N":[32,64,128,256],"seed":7,"metric":{"c":0.5},
      "energy":{"q":"inf"},"ulln":{"q":"inf"}})";
  const auto c = parse_config_text(text);
  const auto j = config_to_json(c);
  const auto again = config_from_json(j);
  CHECK(config_to_json(again) == j);
  CHECK(config_hash(again) == config_hash(c));
  CHECK(!again.kernel->q.has_value());
  CHECK(!again.energy_q.has_value());
  CHECK(again.ulln_q_infinite);
}

TEST_CASE("hash ignores key order and scheduling but not content") {
  const auto a = parse_config_text(R"({"experiment":"gc-sup","seed":3,"N":[8,16],"grid":{"L":4,"G":64}})");
  const auto b = parse_config_text(R"({"grid":{"G":64,"L":4},"N":[8,16],"seed":3,"experiment":"gc-sup","jobs":4})");
  const auto c = parse_config_text(R"({"experiment":"gc-sup","seed":4,"N":[8,16],"grid":{"L":4,"G":64}})");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(c));
  CHECK(config_hash(a).size() == 64);
}

TEST_CASE("schema and parser agree on the key set") {
  std::ifstream in(fs::path(CHAOSLAB_SOURCE_DIR) / "schema" / "run_config.schema.json");
  REQUIRE(in);
  const auto schema = json::parse(in);
  std::set<std::string> from_schema, from_parser;
  collect_schema_keys(schema, "", from_schema);
  const auto full = parse_config_text(R"({"experiment":"chaos-rate","kernel":{"family":"sine"}})");
  collect_keys(config_to_json(full), "", from_parser);
  CHECK(from_schema == from_parser);
}

TEST_CASE("sub-run counts") {
  auto c = parse_config_text(R"({"experiment":"chaos-rate","kernel":{"family":"sine"},"rate":{"halving_seeds":2}})");
  CHECK(subrun_count(c) == 4 * 32 + 4 * 2);
  c = parse_config_text(R"({"experiment":"gc-sup","net":{"size":8},"N":[128,256]})");
  CHECK(subrun_count(c) == 2 * 16 * 8);
  c = parse_config_text(R"({"experiment":"nonuniqueness"})");
  CHECK(subrun_count(c) == 150);
}

TEST_CASE("format_double is shortest round-trip") {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5, 0.0}) {
    CHECK(std::stod(format_double(x)) == x);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(2.0) == "2");
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(format_double(-INFINITY) == "-inf");
}

TEST_CASE("csv writer") {
  CsvWriter w({"a", "b"});
  w.row({"1", "2"}).row({"3", "4"});
  CHECK(w.str() == "a,b\n1,2\n3,4\n");
  CHECK(w.rows() == 2);
  CHECK_THROWS_AS(w.row({"1"}), InvalidArgument);
  CHECK_THROWS_AS(w.row({"1,5", "2"}), InvalidArgument);
}

TEST_CASE("volatile columns do not reach the digest") {
  const std::string a = "N,stat,wallclock_ms\n8,0.5,12.3\n16,0.25,40\n";
  const std::string b = "N,stat,wallclock_ms\n8,0.5,99\n16,0.25,1\n";
  const std::string c = "N,stat,wallclock_ms\n8,0.5,12.3\n16,0.26,40\n";
  CHECK(content_digest(a, {"wallclock_ms"}) == content_digest(b, {"wallclock_ms"}));
  CHECK(content_digest(a, {"wallclock_ms"}) != content_digest(c, {"wallclock_ms"}));
  CHECK(content_digest(a, {}) == sha256_hex(a));
  CHECK(content_digest(a, {}) != content_digest(b, {}));
  CHECK(content_digest(a, {"wallclock_ms"}) == sha256_hex("N,stat,wallclock_ms\n8,0.5,\n16,0.25,\n"));
}

TEST_CASE("plots are deterministic and annotated") {
  PlotSpec p;
  p.kind = PlotKind::loglog;
  p.title = "t";
  p.series.push_back({"s", {1, 10, 100, 1000}, {1, 0.1, 0.01, 0.001}});
  p.gamma_reference = 0.25;
  const auto svg = render_svg(p);
  CHECK(svg == render_svg(p));
  CHECK(svg.find("slope -1.00") != std::string::npos);
  CHECK(svg.find("reference slope -0.2500") != std::string::npos);
  CHECK(svg.rfind("<svg", 0) == 0);

  PlotSpec h;
  h.kind = PlotKind::heatmap;
  h.heat = {0, 1, 2, 3, 4, 5};
  h.heat_columns = 3;
  h.heat_rows = 2;
  const auto hs = render_svg(h);
  std::size_t rects = 0;
  for (std::size_t pos = hs.find("<rect x="); pos != std::string::npos; pos = hs.find("<rect x=", pos + 1)) ++rects;
  CHECK(rects == 6);
  h.heat_rows = 3;
  CHECK_THROWS_AS(render_svg(h), InvalidArgument);
}

TEST_CASE("atomic write leaves no temporary file") {
  const auto dir = scratch_dir("atomic");
  write_file_atomic(dir / "x" / "f.txt", "hello");
  std::ifstream in(dir / "x" / "f.txt");
  std::string s;
  in >> s;
  CHECK(s == "hello");
  CHECK(!fs::exists(dir / "x" / "f.txt.tmp"));
  fs::remove_all(dir);
}

TEST_CASE("a re-run reproduces every manifest digest") {
  const auto dir = scratch_dir("manifest");
  auto c = parse_config_text(R"({"experiment":"chaos-rate","kernel":{"family":"sine"},"N":[16,32,64,128],
      "seeds":3,"T":0.25,"dt":0.0078125,"grid":{"L":6,"G":128},"rate":{"bootstrap":20,"halving_seeds":1}})");
  const auto first = run_experiment(c, dir / "a");
  c.jobs = 3;
  const auto second = run_experiment(c, dir / "b");
  CHECK(compare_manifests(first, second).empty());
  CHECK(first.artifacts.size() >= 4);

  std::ifstream in(dir / "a" / "manifest.json");
  const auto stored = manifest_from_json(json::parse(in));
  CHECK(stored.config_hash == first.config_hash);
  CHECK(compare_manifests(stored, second).empty());
  CHECK(config_hash(config_from_json(stored.config)) == stored.config_hash);

  std::ifstream raw(dir / "a" / "raw.csv");
  std::string header;
  std::getline(raw, header);
  CHECK(header == "experiment_id,N,seed,sup_stat,w1_initial,dt,wallclock_ms");

  auto tampered = stored;
  tampered.artifacts.front().sha256 = std::string(64, '0');
  const auto mismatches = compare_manifests(tampered, second);
  REQUIRE(mismatches.size() == 1);
  CHECK(mismatches.front().file == tampered.artifacts.front().file);
  fs::remove_all(dir);
}
