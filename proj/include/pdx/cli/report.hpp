#pragma once

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pdx/cli/experiments.hpp"
#include "pdx/cli/run_config.hpp"
#include "pdx/errors.hpp"

namespace pdx::cli {

inline constexpr int kReportFormatVersion = 1;
inline constexpr const char* kOutputDirEnv = "PDX_OUTPUT_DIR";

struct RuntimeInfo {
  std::string started_utc;
  double wall_seconds = 0.0;
  unsigned threads = 1;
  std::string compiler;
};

struct VerificationReport {
  int format_version = kReportFormatVersion;
  std::string command;
  std::vector<ExperimentResult> experiments;
  RuntimeInfo runtime;

  [[nodiscard]] std::size_t gates_total() const {
    std::size_t n = 0;
    for (const auto& e : experiments) n += e.gates.size();
    return n;
  }
  [[nodiscard]] std::size_t gates_passed() const {
    std::size_t n = 0;
    for (const auto& e : experiments) {
      for (const auto& g : e.gates) n += g.passed ? 1 : 0;
    }
    return n;
  }
  [[nodiscard]] bool all_passed() const { return gates_passed() == gates_total(); }
};

inline std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string compiler_id() {
#if defined(__clang__)
  return "clang " __clang_version__;
#elif defined(__GNUC__)
  return "gcc " __VERSION__;
#else
  return "unknown";
#endif
}

/// Output directory with the environment override applied.
inline std::filesystem::path output_directory(const RunConfig& cfg) {
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') return env;
  return cfg.output.directory;
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

template <class E>
std::string enum_name(E value, const std::vector<std::pair<E, std::string>>& names) {
  for (const auto& [k, v] : names) {
    if (k == value) return v;
  }
  return "unknown";
}

inline nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

inline nlohmann::json packet_json(const std::optional<Packet>& p) {
  if (!p) return nullptr;
  return {{"center", p->center}, {"width", p->width}, {"momentum", p->momentum}};
}

}  // namespace detail

/// Effective configuration with every default written out.
inline nlohmann::json config_json(const RunConfig& c) {
  using nlohmann::json;
  json j;
  j["experiment"] = to_string(c.experiment);
  j["label"] = c.label;
  j["model"] = {
      {"grid",
       {{"n_points", c.model.grid.n_points},
        {"x_min", c.model.grid.x_min},
        {"x_max", c.model.grid.x_max},
        {"boundary", c.model.grid.boundary == Boundary::periodic ? "periodic" : "hard-wall"}}},
      {"params", {{"mass", c.model.params.mass}, {"hbar", c.model.params.hbar}, {"omega", c.model.params.omega}}},
      {"potential",
       {{"kind", detail::enum_name(c.model.potential, {{PotentialKind::free, "free"},
                                                      {PotentialKind::harmonic, "harmonic"},
                                                      {PotentialKind::custom, "custom"}})},
        {"samples", c.model.samples}}}};
  if (!c.region) {
    j["region"] = nullptr;
  } else if (c.region->basis == Basis::momentum) {
    j["region"] = {{"momentum", json::object()}};
  } else {
    j["region"] = {{"position",
                    {{"boundary", c.region->boundary},
                     {"side_of_c", c.region->side_of_c == Side::above ? "above" : "below"},
                     {"boundary_node", c.region->boundary_node == Membership::C ? "C" : "C_bar"}}}};
  }
  const auto& n = c.numeric;
  const auto& t = n.tolerances;
  j["numeric"] = {
      {"times", {{"t_start", n.t_start}, {"t_end", n.t_end}}},
      {"quadrature",
       {{"rule", n.quadrature.rule == QuadratureRule::simpson ? "simpson" : "trapezoid"},
        {"nodes", n.quadrature.n_nodes}}},
      {"slicing", {{"slices", n.slices}}},
      {"smearing", {{"source", detail::packet_json(n.source)}, {"target", detail::packet_json(n.target)}}},
      {"refinement", {{"enabled", n.refine}}},
      {"zeno", {{"slices", n.zeno_slices}}},
      {"crossing",
       {{"state", n.crossing.state == InitialState::packet ? "packet" : "eigenstate"},
        {"eigenstate_index", n.crossing.eigenstate_index},
        {"windows", n.crossing.windows},
        {"expect", detail::enum_name(n.crossing.expect, {{DeviationExpectation::none, "none"},
                                                         {DeviationExpectation::conserved, "conserved"},
                                                         {DeviationExpectation::interference, "interference"}})}}},
      {"momentum",
       {{"natural_units", n.momentum.natural_units},
        {"masses", n.momentum.sweep_masses},
        {"omegas", n.momentum.sweep_omegas}}},
      {"oracle", {{"sweep_seed", n.oracle.sweep_seed}, {"sweep_count", n.oracle.sweep_count}}},
      {"tolerances",
       {{"identity", t.identity},
        {"completeness", t.completeness},
        {"residual", t.residual},
        {"refinement_ratio", t.refinement_ratio},
        {"route_factor", t.route_factor},
        {"zeno_ratio", t.zeno_ratio},
        {"additivity", t.additivity},
        {"deviation", t.deviation},
        {"euclidean", t.euclidean},
        {"normalization", t.normalization},
        {"flux_identity", t.flux_identity},
        {"free_fidelity", t.free_fidelity},
        {"mehler_fidelity", t.mehler_fidelity}}}};
  json formats = json::array();
  for (auto f : c.output.formats) formats.push_back(f == OutputFormat::json ? "json" : "csv");
  j["output"] = {{"directory", c.output.directory}, {"name", c.output.name}, {"formats", formats}};
  return j;
}

inline nlohmann::json experiment_json(const ExperimentResult& e) {
  using nlohmann::json;
  json metrics = json::object();
  for (const auto& [k, v] : e.metrics) metrics[k] = detail::number(v);
  json tables = json::array();
  for (const auto& t : e.tables) {
    json rows = json::array();
    for (const auto& row : t.rows) {
      json r = json::array();
      for (double v : row) r.push_back(detail::number(v));
      rows.push_back(r);
    }
    tables.push_back({{"name", t.name}, {"columns", t.columns}, {"rows", rows}});
  }
  json gates = json::array();
  for (const auto& g : e.gates) {
    gates.push_back({{"name", g.name},
                     {"criterion", g.criterion},
                     {"value", detail::number(g.value)},
                     {"threshold", detail::number(g.threshold)},
                     {"comparison", g.comparison},
                     {"passed", g.passed}});
  }
  return {{"name", e.name},
          {"experiment", to_string(e.experiment)},
          {"passed", e.passed()},
          {"config", config_json(e.config)},
          {"config_source", {{"text", e.config.source_text}, {"overrides", e.config.overrides}}},
          {"metrics", metrics},
          {"tables", tables},
          {"gates", gates},
          {"warnings", e.warnings},
          {"runtime_seconds", e.runtime_seconds}};
}

inline nlohmann::json report_json(const VerificationReport& r) {
  return {{"format_version", r.format_version},
          {"tool", "pdx"},
          {"command", r.command},
          {"summary",
           {{"experiments", r.experiments.size()},
            {"gates_total", r.gates_total()},
            {"gates_passed", r.gates_passed()},
            {"all_passed", r.all_passed()}}},
          {"experiments",
           [&] {
             nlohmann::json a = nlohmann::json::array();
             for (const auto& e : r.experiments) a.push_back(experiment_json(e));
             return a;
           }()},
          {"runtime",
           {{"started_utc", r.runtime.started_utc},
            {"wall_seconds", r.runtime.wall_seconds},
            {"threads", r.runtime.threads},
            {"compiler", r.runtime.compiler}}}};
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv(std::ostream& out, const Table& t) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
    out << '\n';
  }
}

/// Parses a numeric CSV written by write_csv.
inline Table read_csv(std::istream& in, std::string name = {}) {
  Table t;
  t.name = std::move(name);
  std::string line;
  if (!std::getline(in, line)) throw IoError("CSV is empty");
  std::stringstream header(line);
  for (std::string col; std::getline(header, col, ',');) t.columns.push_back(col);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') throw IoError("CSV cell '" + cell + "' is not a number");
      row.push_back(v);
    }
    if (row.size() != t.columns.size()) throw IoError("CSV row width differs from the header");
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return read_csv(in, path.stem().string());
}

// ---------------------------------------------------------------------------
// Emission

enum class ReportFormat { json, csv_bundle };

inline std::string file_stem(const VerificationReport& r) {
  if (r.experiments.size() == 1) return r.experiments.front().name;
  return r.command.empty() ? "report" : r.command;
}

inline void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << body;
  out.flush();
  if (!out) throw IoError("write to " + path.string() + " failed");
}

/// Writes the report into `directory`; returns the files written. The report
/// itself is untouched, so a failed write can be retried elsewhere.
inline std::vector<std::filesystem::path> emit_report(const VerificationReport& report, ReportFormat format,
                                                      const std::filesystem::path& directory) {
  if (report.experiments.empty()) {
    throw PreconditionError("refusing to emit a report with zero experiments: nothing was run, so there is "
                            "nothing to verify");
  }
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec || !std::filesystem::is_directory(directory)) {
    throw IoError("output directory " + directory.string() + " is not writable: " +
                  (ec ? ec.message() : std::string("not a directory")));
  }
  std::vector<std::filesystem::path> written;
  const std::string stem = file_stem(report);
  if (format == ReportFormat::json) {
    const auto path = directory / (stem + ".json");
    write_file(path, report_json(report).dump(2) + "\n");
    written.push_back(path);
    return written;
  }
  for (const auto& e : report.experiments) {
    for (const auto& t : e.tables) {
      std::ostringstream os;
      write_csv(os, t);
      const std::string prefix = report.experiments.size() == 1 ? stem : stem + "_" + e.name;
      const auto path = directory / (prefix + "_" + t.name + ".csv");
      write_file(path, os.str());
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace pdx::cli
