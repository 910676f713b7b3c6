#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "pdx/cli/config.hpp"
#include "pdx/cli/experiments.hpp"
#include "pdx/cli/report.hpp"

using namespace pdx;
using namespace pdx::cli;
using Catch::Matchers::ContainsSubstring;

namespace {

const std::string kMinimal = R"(
experiment: resolution-identity
model:
  grid: {n_points: 64, x_min: -5, x_max: 5}
  potential: {kind: free}
region:
  position: {boundary: 0}
)";

std::vector<std::string> problems_of(const std::string& text, const std::vector<std::string>& overrides = {}) {
  try {
    parse_config(text, overrides);
  } catch (const ConfigError& e) {
    return e.problems();
  }
  return {};
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("pdx_test_cli_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

VerificationReport single(const RunConfig& cfg) {
  VerificationReport r;
  r.command = "verify";
  r.experiments.push_back(run_experiment(cfg));
  return r;
}

}  // namespace

TEST_CASE("minimal config gets documented defaults", "[config]") {
  const RunConfig c = parse_config(kMinimal);
  CHECK(c.experiment == Experiment::resolution_identity);
  CHECK(c.model.grid.n_points == 64);
  CHECK(c.model.grid.boundary == Boundary::hard_wall);
  CHECK(c.model.params.mass == 1.0);
  CHECK(c.model.params.hbar == 1.0);
  CHECK(c.model.params.omega == 0.0);
  REQUIRE(c.region.has_value());
  CHECK(c.region->basis == Basis::position);
  CHECK(c.region->side_of_c == Side::above);
  CHECK(c.region->boundary_node == Membership::C);
  CHECK(c.numeric.quadrature.rule == QuadratureRule::simpson);
  CHECK(c.numeric.quadrature.n_nodes == 129);
  CHECK(c.numeric.slices == std::vector<int>{1, 8, 32});
  CHECK(c.numeric.t_start == 0.0);
  CHECK(c.numeric.t_end == 1.0);
  CHECK(c.numeric.tolerances.identity == 1e-11);
  CHECK(c.numeric.tolerances.refinement_ratio == 0.6);
  CHECK(c.output.directory == "pdx-out");
  CHECK(c.output.formats.size() == 2);
}

TEST_CASE("negative mass gives one error naming params.mass", "[config]") {
  const auto p = problems_of(R"(
experiment: resolution-identity
model:
  grid: {n_points: 64, x_min: -5, x_max: 5}
  params: {mass: -1}
region:
  position: {boundary: 0}
)");
  REQUIRE(p.size() == 1);
  CHECK_THAT(p[0], ContainsSubstring("params.mass"));
  REQUIRE(problems_of(kMinimal, {"model.params.mass=-2.5"}).size() == 1);
}

TEST_CASE("position and momentum regions are exclusive", "[config]") {
  const auto p = problems_of(kMinimal, {"region.momentum={}"});
  REQUIRE(p.size() == 1);
  CHECK_THAT(p[0], ContainsSubstring("exactly one"));
}

TEST_CASE("unknown keys name the nearest valid key", "[config]") {
  const auto p = problems_of(kMinimal, {"model.grid.npoints=32"});
  REQUIRE(p.size() == 1);
  CHECK_THAT(p[0], ContainsSubstring("model.grid.npoints"));
  CHECK_THAT(p[0], ContainsSubstring("model.grid.n_points"));

  const auto top = problems_of(kMinimal, {"numerics.times.t_end=2"});
  REQUIRE(top.size() == 1);
  CHECK_THAT(top[0], ContainsSubstring("'numeric'"));

  const auto value = problems_of(kMinimal, {"model.grid.boundary=hardwall"});
  REQUIRE(value.size() == 1);
  CHECK_THAT(value[0], ContainsSubstring("hard-wall"));
}

TEST_CASE("missing blocks name the experiment's requirements", "[config]") {
  const std::string text = R"(
experiment: pdx-position
model:
  grid: {n_points: 128, x_min: -10, x_max: 10}
region:
  position: {boundary: 0}
)";
  const auto p = problems_of(text);
  REQUIRE(p.size() == 1);
  CHECK_THAT(p[0], ContainsSubstring("pdx-position requires"));
  CHECK_THAT(p[0], ContainsSubstring("numeric.smearing.source"));

  const auto no_model = problems_of("experiment: zeno-convergence\n");
  REQUIRE(no_model.size() == 1);
  CHECK_THAT(no_model[0], ContainsSubstring("region.position"));

  CHECK(problems_of("experiment: oracle-suite\n").empty());
}

TEST_CASE("every problem is reported at once", "[config]") {
  const auto p = problems_of(kMinimal, {"model.params.hbar=0", "numeric.quadrature.nodes=64",
                                        "numeric.tolerances.identity=-1", "output.format=[json]"});
  CHECK(p.size() == 4);
  CHECK_THROWS_AS(parse_config("experiment: [unclosed"), ConfigError);
}

TEST_CASE("overrides replace values and create blocks", "[config]") {
  const RunConfig c = parse_config(kMinimal, {"numeric.slicing.slices=[2, 4]", "model.grid.n_points=128",
                                              "numeric.times.t_end=0.5", "label=short"});
  CHECK(c.numeric.slices == std::vector<int>{2, 4});
  CHECK(c.model.grid.n_points == 128);
  CHECK(c.numeric.t_end == 0.5);
  CHECK(c.display_name() == "short");
  CHECK(c.overrides.size() == 4);

  CHECK_THAT(problems_of(kMinimal, {"experiment.kind=free"}).at(0), ContainsSubstring("not a block"));
  CHECK_THAT(problems_of(kMinimal, {"no-equals-sign"}).at(0), ContainsSubstring("key=value"));
}

TEST_CASE("config files load from disk", "[config]") {
  const auto dir = scratch("load");
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "c.yaml") << kMinimal;
  const RunConfig c = load_config((dir / "c.yaml").string());
  CHECK(c.source_text == kMinimal);
  CHECK_THROWS_AS(load_config((dir / "missing.yaml").string()), IoError);
}

TEST_CASE("resolution-identity experiment passes its gate", "[experiment]") {
  const RunConfig c = parse_config(kMinimal, {"numeric.slicing.slices=[32]"});
  const ExperimentResult r = run_experiment(c);
  REQUIRE(r.gates.size() == 1);
  CHECK(r.gates[0].passed);
  CHECK(r.gates[0].value <= 1e-11);
  CHECK(r.gates[0].criterion == criteria::resolution_of_identity);
  CHECK(r.passed());
}

TEST_CASE("zeno experiment reports a table and fitted order", "[experiment]") {
  const RunConfig c = parse_config(R"(
experiment: zeno-convergence
model:
  grid: {n_points: 96, x_min: -6, x_max: 6}
region:
  position: {boundary: 0}
numeric:
  times: {t_end: 0.5}
  zeno: {slices: [4, 16, 64]}
)");
  const ExperimentResult r = run_experiment(c);
  REQUIRE(r.tables.size() == 1);
  CHECK(r.tables[0].columns == std::vector<std::string>{"K", "delta_t", "frobenius_error", "empirical_order"});
  CHECK(r.tables[0].rows.size() == 3);
  const auto fitted = std::find_if(r.metrics.begin(), r.metrics.end(),
                                   [](const auto& m) { return m.first == "fitted_order"; });
  REQUIRE(fitted != r.metrics.end());
  CHECK(std::isfinite(fitted->second));
  CHECK(fitted->second > 0.0);
}

TEST_CASE("identical configs give identical payloads", "[experiment][determinism]") {
  const RunConfig c = parse_config(R"(
experiment: crossing-distribution
model:
  grid: {n_points: 128, x_min: -10, x_max: 10}
region:
  position: {boundary: 0}
numeric:
  times: {t_end: 1}
  quadrature: {nodes: 33}
  smearing:
    source: {center: -2, width: 0.4, momentum: 1}
  crossing: {windows: 4}
)");
  auto a = experiment_json(run_experiment(c, Exec{1}));
  auto b = experiment_json(run_experiment(c, Exec{3}));
  a.erase("runtime_seconds");
  b.erase("runtime_seconds");
  CHECK(a.dump() == b.dump());
}

TEST_CASE("every gate names what it instantiates", "[experiment]") {
  const RunConfig c = parse_config("experiment: oracle-suite\n", {"numeric.oracle.sweep_count=3"});
  const ExperimentResult r = run_experiment(c);
  REQUIRE(r.gates.size() == 6);
  for (const auto& g : r.gates) {
    CHECK_FALSE(g.name.empty());
    CHECK_FALSE(g.criterion.empty());
  }
}

TEST_CASE("module errors carry the experiment stage", "[experiment]") {
  const RunConfig c = parse_config(R"(
experiment: pdx-position
model:
  grid: {n_points: 64, x_min: -10, x_max: 10}
region:
  position: {boundary: 0}
numeric:
  smearing:
    source: {center: -2, width: 0.05}
    target: {center: 2, width: 0.5}
)");
  try {
    run_experiment(c);
    FAIL("narrow packet accepted");
  } catch (const ExperimentError& e) {
    CHECK_THAT(e.what(), ContainsSubstring("pdx-position/baseline"));
  }
}

TEST_CASE("report JSON echoes the effective config", "[report]") {
  const RunConfig c = parse_config(kMinimal, {"numeric.slicing.slices=[4]"});
  const auto j = report_json(single(c));
  CHECK(j["format_version"] == kReportFormatVersion);
  const auto& e = j["experiments"][0];
  CHECK(e["config"]["numeric"]["quadrature"]["nodes"] == 129);
  CHECK(e["config"]["numeric"]["tolerances"]["identity"] == 1e-11);
  CHECK(e["config"]["region"]["position"]["boundary_node"] == "C");
  CHECK(e["config_source"]["text"] == kMinimal);
  CHECK(e["config_source"]["overrides"][0] == "numeric.slicing.slices=[4]");
  CHECK(j["summary"]["all_passed"] == true);
}

TEST_CASE("empty reports are refused", "[report]") {
  VerificationReport empty;
  try {
    emit_report(empty, ReportFormat::json, scratch("empty"));
    FAIL("empty report emitted");
  } catch (const PreconditionError& e) {
    CHECK_THAT(e.what(), ContainsSubstring("zero experiments"));
  }
}

TEST_CASE("unwritable paths keep the report for a retry", "[report]") {
  const VerificationReport report = single(parse_config(kMinimal, {"numeric.slicing.slices=[2]"}));
  const auto dir = scratch("unwritable");
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "blocker") << "not a directory";
  CHECK_THROWS_AS(emit_report(report, ReportFormat::json, dir / "blocker" / "out"), IoError);
  CHECK(report.gates_total() == 1);
  const auto files = emit_report(report, ReportFormat::json, dir / "ok");
  REQUIRE(files.size() == 1);
  CHECK(std::filesystem::exists(files[0]));
}

TEST_CASE("convergence CSV round-trips", "[report][csv]") {
  const RunConfig c = parse_config(R"(
experiment: zeno-convergence
model:
  grid: {n_points: 64, x_min: -5, x_max: 5}
region:
  position: {boundary: 0.3}
numeric:
  times: {t_end: 0.3}
  zeno: {slices: [2, 8, 32]}
)");
  const VerificationReport report = single(c);
  const auto files = emit_report(report, ReportFormat::csv_bundle, scratch("csv"));
  REQUIRE(files.size() == 1);
  const Table back = read_csv(files[0]);
  const Table& orig = report.experiments[0].tables[0];
  REQUIRE(back.columns == orig.columns);
  REQUIRE(back.rows.size() == orig.rows.size());
  for (std::size_t i = 0; i < orig.rows.size(); ++i) {
    for (std::size_t k = 0; k < orig.rows[i].size(); ++k) {
      const double a = orig.rows[i][k];
      const double b = back.rows[i][k];
      CHECK(((std::isnan(a) && std::isnan(b)) || a == b));
    }
  }
}

TEST_CASE("output directory honours the environment", "[report]") {
  RunConfig c = parse_config(kMinimal);
  ::unsetenv(kOutputDirEnv);
  CHECK(output_directory(c) == std::filesystem::path("pdx-out"));
  ::setenv(kOutputDirEnv, "/tmp/elsewhere", 1);
  CHECK(output_directory(c) == std::filesystem::path("/tmp/elsewhere"));
  ::unsetenv(kOutputDirEnv);
}
