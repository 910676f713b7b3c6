// pdx: run path decomposition expansion experiments from YAML configs and
// write JSON/CSV reports.
//
//   pdx verify   --config configs/pdx_position_free.yaml
//   pdx sweep    --config a.yaml --config b.yaml --vary model.grid.n_points=256,512
//   pdx crossing --config configs/crossing_at_surface.yaml
//   pdx oracle
//
// Exit status: 0 when every gate passes, 2 when a gate fails, 1 on error.

#include <CLI11.hpp>

#include <cctype>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "pdx/cli/config.hpp"
#include "pdx/cli/experiments.hpp"
#include "pdx/cli/report.hpp"

namespace {

using namespace pdx::cli;

constexpr int kExitPass = 0;
constexpr int kExitError = 1;
constexpr int kExitGateFailure = 2;

struct Options {
  std::vector<std::string> configs;
  std::vector<std::string> sets;
  std::vector<std::string> vary;
  unsigned threads = 1;
  bool quiet = false;
};

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

/// One override list per point of the --vary Cartesian product.
std::vector<std::vector<std::string>> vary_product(const std::vector<std::string>& vary) {
  std::vector<std::vector<std::string>> out{{}};
  for (const auto& v : vary) {
    const auto eq = v.find('=');
    if (eq == std::string::npos) throw pdx::DomainError("--vary '" + v + "': expected key=v1,v2,...");
    const std::string key = v.substr(0, eq);
    std::vector<std::vector<std::string>> next;
    for (const auto& base : out) {
      for (const auto& value : split(v.substr(eq + 1), ',')) {
        auto item = base;
        item.push_back(key + "=" + value);
        next.push_back(std::move(item));
      }
    }
    out = std::move(next);
  }
  return out;
}

std::string suffix_for(const std::vector<std::string>& overrides) {
  std::string s;
  for (const auto& o : overrides) {
    for (char c : o) s += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
    s += "_";
  }
  if (!s.empty()) s.pop_back();
  return s;
}

void print_summary(const VerificationReport& report, bool quiet) {
  for (const auto& e : report.experiments) {
    std::printf("%s (%s) %.2fs\n", e.name.c_str(), to_string(e.experiment).c_str(), e.runtime_seconds);
    if (!quiet) {
      for (const auto& g : e.gates) {
        std::printf("  [%s] %-44s %-36s %.6g %s %.6g\n", g.passed ? "PASS" : "FAIL", g.name.c_str(),
                    g.criterion.c_str(), g.value, g.comparison.c_str(), g.threshold);
      }
    }
    for (const auto& w : e.warnings) std::fprintf(stderr, "warning: %s: %s\n", e.name.c_str(), w.c_str());
  }
  std::printf("gates passed: %zu/%zu\n", report.gates_passed(), report.gates_total());
}

int write_outputs(const VerificationReport& report, const RunConfig& lead) {
  const auto dir = output_directory(lead);
  try {
    for (auto f : lead.output.formats) {
      const auto files = emit_report(report, f == OutputFormat::json ? ReportFormat::json : ReportFormat::csv_bundle, dir);
      for (const auto& p : files) std::printf("wrote %s\n", p.string().c_str());
    }
  } catch (const pdx::IoError& e) {
    std::fprintf(stderr, "error: %s\nthe report follows on stdout so the results are not lost\n", e.what());
    std::cout << report_json(report).dump(2) << std::endl;
    return kExitError;
  }
  return report.all_passed() ? kExitPass : kExitGateFailure;
}

int run(const std::string& command, const Options& opt, const std::vector<std::string>& forced) {
  const auto started = std::chrono::steady_clock::now();
  VerificationReport report;
  report.command = command;
  report.runtime.started_utc = utc_now();
  report.runtime.threads = opt.threads;
  report.runtime.compiler = compiler_id();

  std::vector<RunConfig> configs;
  const std::vector<std::string> paths = opt.configs.empty() ? std::vector<std::string>{""} : opt.configs;
  for (const auto& path : paths) {
    for (const auto& point : vary_product(opt.vary)) {
      std::vector<std::string> overrides = opt.sets;
      overrides.insert(overrides.end(), point.begin(), point.end());
      overrides.insert(overrides.end(), forced.begin(), forced.end());
      RunConfig cfg = path.empty() ? parse_config("", overrides) : load_config(path, overrides);
      if (!point.empty()) cfg.label = cfg.display_name() + "_" + suffix_for(point);
      configs.push_back(std::move(cfg));
    }
  }

  // Experiments share the thread budget: several at once, or one with parallel quadrature.
  const pdx::Exec outer{configs.size() > 1 ? opt.threads : 1u};
  const pdx::Exec inner{configs.size() > 1 ? 1u : opt.threads};
  report.experiments = pdx::parallel_map<ExperimentResult>(
      configs.size(), outer, [&](std::size_t i) { return run_experiment(configs[i], inner); });
  report.runtime.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  print_summary(report, opt.quiet);
  return write_outputs(report, configs.front());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Path decomposition expansion experiments"};
  app.require_subcommand(1);

  Options opt;
  const auto common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", opt.configs, "YAML experiment config");
    if (config_required) c->required();
    sub->add_option("--set", opt.sets, "Override a config value, e.g. --set model.grid.n_points=1024");
    sub->add_option("--threads", opt.threads, "Concurrency budget")->check(CLI::PositiveNumber);
    sub->add_flag("--quiet", opt.quiet, "Print one line per experiment instead of every gate");
  };

  auto* verify = app.add_subcommand("verify", "Run the experiment named in a config and check its gates");
  common(verify, true);
  auto* sweep = app.add_subcommand("sweep", "Run several configs or parameter variations into one report");
  common(sweep, true);
  sweep->add_option("--vary", opt.vary, "key=v1,v2,... ; repeat for a Cartesian product");
  auto* crossing = app.add_subcommand("crossing", "Crossing-time distribution and sum-rule diagnostic");
  common(crossing, true);
  auto* oracle = app.add_subcommand("oracle", "Analytic oracle self-consistency and grid fidelity");
  common(oracle, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitError;
  }

  try {
    if (verify->parsed()) {
      if (opt.configs.size() != 1) throw pdx::DomainError("verify takes exactly one --config");
      return run("verify", opt, {});
    }
    if (sweep->parsed()) return run("sweep", opt, {});
    if (crossing->parsed()) return run("crossing", opt, {"experiment=crossing-distribution"});
    return run("oracle", opt, {"experiment=oracle-suite"});
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  }
  return kExitError;
}
