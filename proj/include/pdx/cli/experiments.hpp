#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pdx.hpp"
#include "pdx/cli/run_config.hpp"

namespace pdx::cli {

/// Acceptance criteria and module invariants that gates can instantiate.
namespace criteria {
inline constexpr const char* resolution_of_identity = "resolution-of-identity";
inline constexpr const char* crossing_completeness = "crossing-class-completeness";
inline constexpr const char* euclidean_expansion = "euclidean-point-expansion";
inline constexpr const char* smeared_expansion = "smeared-expansion";
inline constexpr const char* generalized_expansion = "generalized-expansion";
inline constexpr const char* zeno_convergence = "zeno-convergence";
inline constexpr const char* momentum_expansion = "momentum-expansion";
inline constexpr const char* oracle_consistency = "oracle-self-consistency";
inline constexpr const char* sum_rule = "sum-rule-diagnostic";
inline constexpr const char* fidelity = "grid-analytic-fidelity";
inline constexpr const char* never_cross_bound = "invariant:never-cross-probability-at-most-one";
inline constexpr const char* crossing_nonnegative = "invariant:crossing-probability-nonnegative";
inline constexpr const char* quadrature_refinement = "invariant:operator-route-refines-with-quadrature";
}  // namespace criteria

/// Wraps a module error with the experiment stage it came from.
class ExperimentError : public Error {
 public:
  using Error::Error;
};

struct Gate {
  std::string name;
  std::string criterion;
  double value = 0.0;
  double threshold = 0.0;
  /// One of "<=", "<", ">", "==".
  std::string comparison;
  bool passed = false;
};

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct ExperimentResult {
  std::string name;
  Experiment experiment = Experiment::resolution_identity;
  RunConfig config;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<Table> tables;
  std::vector<Gate> gates;
  std::vector<std::string> warnings;
  double runtime_seconds = 0.0;

  [[nodiscard]] bool passed() const {
    return std::all_of(gates.begin(), gates.end(), [](const Gate& g) { return g.passed; });
  }

  void metric(std::string key, double value) { metrics.emplace_back(std::move(key), value); }

  Gate& at_most(std::string name, std::string criterion, double value, double threshold) {
    gates.push_back({std::move(name), std::move(criterion), value, threshold, "<=", value <= threshold});
    return gates.back();
  }

  Gate& above(std::string name, std::string criterion, double value, double threshold) {
    gates.push_back({std::move(name), std::move(criterion), value, threshold, ">", value > threshold});
    return gates.back();
  }

  Gate& exactly(std::string name, std::string criterion, double value, double expected) {
    gates.push_back({std::move(name), std::move(criterion), value, expected, "==", value == expected});
    return gates.back();
  }
};

namespace detail {

template <class F>
auto in_stage(const std::string& where, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ExperimentError& e) {
    throw ExperimentError(where + "/" + e.what());
  } catch (const std::exception& e) {
    throw ExperimentError(where + ": " + e.what());
  }
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

inline RunConfig with_grid(RunConfig cfg, std::size_t n_points) {
  cfg.model.grid.n_points = n_points;
  if (cfg.model.potential == PotentialKind::custom) {
    throw UnsupportedError("grid refinement is not defined for sampled custom potentials");
  }
  return cfg;
}

inline void warn_edge(ExperimentResult& r, const std::string& where, double edge) {
  if (edge > 1e-6) {
    r.warnings.push_back(where + ": boundary-node amplitude is " + fmt(edge) +
                         " of the maximum; widen the box or shorten the time span");
  }
}

inline void warn_snap(ExperimentResult& r, const System& sys, const RegionSpec& region) {
  const SurfaceGeometry geom = resolve_surface(sys.grid(), region);
  if (geom.snap_offset() > 0.0) {
    r.warnings.push_back("surface snapped from " + fmt(geom.requested) + " to node " + fmt(geom.used));
  }
}

inline Projector projector_for(const System& sys, const RegionSpec& region) {
  if (region.basis == Basis::momentum) return momentum_projector(sys.grid());
  return position_projector(sys.grid(), region);
}

inline Vec eigenstate(const System& sys, int index) {
  if (index >= sys.dim()) throw DomainError("eigenstate index exceeds the grid dimension");
  return sys.spectrum().eigenvectors.col(index) / std::sqrt(sys.grid().dx());
}

inline double ratio(double refined, double baseline) { return baseline > 0.0 ? refined / baseline : 0.0; }

// ---------------------------------------------------------------------------

inline void run_resolution_identity(const RunConfig& cfg, ExperimentResult& r, const Exec&) {
  const System sys = in_stage("model", [&] { return System(cfg.build_model()); });
  const RegionSpec region = cfg.region->spec();
  const Projector p_c = in_stage("projector", [&] { return projector_for(sys, region); });
  const bool elements = cfg.numeric.source && cfg.numeric.target;
  Vec initial, final_state;
  if (elements) {
    initial = cfg.numeric.source->sample(sys.grid(), sys.params().hbar);
    final_state = cfg.numeric.target->sample(sys.grid(), sys.params().hbar);
  }

  Table t{"identity", {"slices", "delta_t", "identity_residual"}, {}};
  if (elements) t.columns.push_back("completeness_error");
  double worst = 0.0;
  for (int n : cfg.numeric.slices) {
    const SlicingSpec slicing{cfg.numeric.t_start, cfg.numeric.t_end, n};
    const auto terms = in_stage("slicing n=" + std::to_string(n), [&] {
      return resolution_of_identity(p_c, sys.propagator(slicing.delta_t()), slicing);
    });
    const double res = terms.identity_residual();
    worst = std::max(worst, res);
    std::vector<double> row{static_cast<double>(n), slicing.delta_t(), res};
    r.at_most("identity_residual[n=" + std::to_string(n) + "]", criteria::resolution_of_identity, res,
              cfg.numeric.tolerances.identity);
    if (elements) {
      const auto el = crossing_matrix_element(terms, sys.grid(), final_state, initial);
      const double err = std::abs(el.sum() - el.full);
      row.push_back(err);
      r.at_most("completeness_error[n=" + std::to_string(n) + "]", criteria::crossing_completeness, err,
                cfg.numeric.tolerances.completeness);
      for (const auto& w : el.warnings) r.warnings.push_back("slicing n=" + std::to_string(n) + ": " + w);
    }
    t.rows.push_back(std::move(row));
  }
  r.metric("max_identity_residual", worst);
  r.tables.push_back(std::move(t));
}

inline void run_pdx_position(const RunConfig& cfg, ExperimentResult& r, const Exec& exec, bool same_side) {
  const RegionSpec region = cfg.region->spec();
  const auto evaluate = [&](const RunConfig& c, const QuadratureSpec& quad, const std::string& stage) {
    return in_stage(stage, [&] {
      const System sys(c.build_model());
      if (stage == "baseline") warn_snap(r, sys, region);
      const auto out = same_side ? pdx_assemble_same_side(sys, region, *c.numeric.source, *c.numeric.target,
                                                          c.times(), quad, exec)
                                 : pdx_assemble_opposite(sys, region, *c.numeric.source, *c.numeric.target,
                                                         c.times(), quad, exec);
      warn_edge(r, stage, out.edge_amplitude);
      return out;
    });
  };

  Table t{"residuals",
          {"n_points", "quadrature_nodes", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "residual"},
          {}};
  const auto add_row = [&](std::size_t n, const QuadratureSpec& q, const PdxComparison& c) {
    t.rows.push_back({static_cast<double>(n), static_cast<double>(q.n_nodes), c.lhs.real(), c.lhs.imag(),
                      c.rhs.real(), c.rhs.imag(), c.residual});
  };

  const auto& tol = cfg.numeric.tolerances;
  const auto base = evaluate(cfg, cfg.numeric.quadrature, "baseline");
  add_row(cfg.model.grid.n_points, cfg.numeric.quadrature, base);
  r.metric("residual", base.residual);
  r.metric("lhs_abs", std::abs(base.lhs));
  r.metric("initial_leak", base.initial_leak);
  r.metric("final_leak", base.final_leak);
  r.at_most("residual", criteria::smeared_expansion, base.residual, tol.residual);

  if (cfg.numeric.refine) {
    const RunConfig fine = with_grid(cfg, 2 * cfg.model.grid.n_points);
    const QuadratureSpec q = cfg.numeric.quadrature.refined();
    const auto ref = evaluate(fine, q, "refined");
    add_row(fine.model.grid.n_points, q, ref);
    const double rho = ratio(ref.residual, base.residual);
    r.metric("residual_refined", ref.residual);
    r.metric("refinement_ratio", rho);
    r.at_most("refinement_ratio", criteria::smeared_expansion, rho, tol.refinement_ratio);
  }
  r.tables.push_back(std::move(t));
}

inline void run_pdx_generalized(const RunConfig& cfg, ExperimentResult& r, const Exec& exec) {
  const RegionSpec region = cfg.region->spec();
  const auto& tol = cfg.numeric.tolerances;
  const bool flux_route = region.basis == Basis::position;

  struct Routes {
    double op = 0.0;
    double op_fine_quadrature = 0.0;
    double flux = std::numeric_limits<double>::quiet_NaN();
  };
  const auto evaluate = [&](const RunConfig& c, const QuadratureSpec& quad, const std::string& stage) {
    return in_stage(stage, [&] {
      const System sys(c.build_model());
      const Projector p_c = projector_for(sys, region);
      const Vec src = c.numeric.source->sample(sys.grid(), sys.params().hbar);
      Routes out;
      const auto op = generalized_pdx(sys, p_c, c.times(), quad, Mat(src), exec);
      const auto op_fine = generalized_pdx(sys, p_c, c.times(), quad.refined(), Mat(src), exec);
      if (flux_route) {
        const Vec dst = c.numeric.target->sample(sys.grid(), sys.params().hbar);
        out.op = op.element_residual(sys.grid(), dst);
        out.op_fine_quadrature = op_fine.element_residual(sys.grid(), dst);
        const auto flux = pdx_assemble_opposite(sys, region, *c.numeric.source, *c.numeric.target, c.times(),
                                                quad, exec);
        warn_edge(r, stage, flux.edge_amplitude);
        out.flux = flux.residual;
      } else {
        out.op = op.residual;
        out.op_fine_quadrature = op_fine.residual;
      }
      return out;
    });
  };

  Table t{"routes", {"n_points", "quadrature_nodes", "operator_residual", "operator_residual_fine_quadrature"}, {}};
  if (flux_route) t.columns.push_back("flux_residual");
  const auto add_row = [&](std::size_t n, const QuadratureSpec& q, const Routes& x) {
    std::vector<double> row{static_cast<double>(n), static_cast<double>(q.n_nodes), x.op, x.op_fine_quadrature};
    if (flux_route) row.push_back(x.flux);
    t.rows.push_back(std::move(row));
  };

  const Routes base = evaluate(cfg, cfg.numeric.quadrature, "baseline");
  add_row(cfg.model.grid.n_points, cfg.numeric.quadrature, base);
  r.metric("operator_residual", base.op);
  r.metric("operator_residual_fine_quadrature", base.op_fine_quadrature);
  r.at_most("operator_residual", criteria::generalized_expansion, base.op, tol.residual);
  r.at_most("operator_quadrature_refinement", criteria::quadrature_refinement,
            ratio(base.op_fine_quadrature, base.op), 1.0);
  if (flux_route) {
    const double factor = std::max(base.op, base.flux) / std::min(base.op, base.flux);
    r.metric("flux_residual", base.flux);
    r.metric("route_factor", factor);
    r.at_most("flux_residual", criteria::generalized_expansion, base.flux, tol.residual);
    r.at_most("route_factor", criteria::generalized_expansion, factor, tol.route_factor);
  }

  if (cfg.numeric.refine && region.basis == Basis::position) {
    const RunConfig fine = with_grid(cfg, 2 * cfg.model.grid.n_points);
    const QuadratureSpec q = cfg.numeric.quadrature.refined();
    const Routes ref = evaluate(fine, q, "refined");
    add_row(fine.model.grid.n_points, q, ref);
    r.metric("operator_refinement_ratio", ratio(ref.op, base.op));
    r.metric("flux_refinement_ratio", ratio(ref.flux, base.flux));
    r.at_most("operator_refinement_ratio", criteria::generalized_expansion, ratio(ref.op, base.op),
              tol.refinement_ratio);
    r.at_most("flux_refinement_ratio", criteria::generalized_expansion, ratio(ref.flux, base.flux),
              tol.refinement_ratio);
  }
  r.tables.push_back(std::move(t));
}

inline void run_pdx_momentum(const RunConfig& cfg, ExperimentResult& r, const Exec& exec) {
  const auto& n = cfg.numeric;
  std::vector<double> masses = n.momentum.sweep_masses;
  std::vector<double> omegas = n.momentum.sweep_omegas;
  if (masses.empty()) masses.push_back(cfg.model.params.mass);
  if (omegas.empty()) omegas.push_back(cfg.model.params.omega);

  struct Point {
    double mass, omega;
    MomentumPdxResult base, refined;
  };
  std::vector<std::pair<double, double>> grid_points;
  for (double m : masses) {
    for (double w : omegas) grid_points.emplace_back(m, w);
  }

  const auto solve = [&](double m, double w, std::size_t n_points, const QuadratureSpec& quad) {
    const PhysicalParams params{m, cfg.model.params.hbar, w};
    const double ps = n.momentum.natural_units ? natural_momentum(params) : 1.0;
    const double ts = n.momentum.natural_units ? 1.0 / w : 1.0;
    const GridModel grid(n_points, cfg.model.grid.x_min * ps, cfg.model.grid.x_max * ps, cfg.model.grid.boundary);
    const auto scale = [&](const Packet& p) { return Packet{p.center * ps, p.width * ps, p.momentum}; };
    const DualModel dual = dual_map(params, grid);
    return momentum_pdx_residual(dual, scale(*n.source), scale(*n.target), {n.t_start * ts, n.t_end * ts}, quad,
                                 Exec{1});
  };

  const auto points = parallel_map<Point>(grid_points.size(), exec, [&](std::size_t i) {
    const double m = grid_points[i].first;
    const double w = grid_points[i].second;
    const std::string where = "mass=" + fmt(m) + " omega=" + fmt(w);
    Point p{m, w, {}, {}};
    p.base = in_stage(where + " baseline", [&] { return solve(m, w, cfg.model.grid.n_points, n.quadrature); });
    if (n.refine) {
      p.refined = in_stage(where + " refined",
                           [&] { return solve(m, w, 2 * cfg.model.grid.n_points, n.quadrature.refined()); });
    }
    return p;
  });

  Table t{"momentum",
          {"mass", "omega", "n_points", "quadrature_nodes", "residual", "residual_other_sign", "resolved_sign"},
          {}};
  std::set<int> signs;
  double worst = 0.0;
  double worst_ratio = 0.0;
  for (const auto& p : points) {
    const std::string tag = "[mass=" + fmt(p.mass) + ",omega=" + fmt(p.omega) + "]";
    t.rows.push_back({p.mass, p.omega, static_cast<double>(cfg.model.grid.n_points),
                      static_cast<double>(n.quadrature.n_nodes), p.base.residual, p.base.residual_other_sign,
                      static_cast<double>(p.base.resolved_sign)});
    warn_edge(r, "baseline " + tag, p.base.edge_amplitude);
    signs.insert(p.base.resolved_sign);
    worst = std::max(worst, p.base.residual);
    r.at_most("residual" + tag, criteria::momentum_expansion, p.base.residual, n.tolerances.residual);
    if (n.refine) {
      t.rows.push_back({p.mass, p.omega, static_cast<double>(2 * cfg.model.grid.n_points),
                        static_cast<double>(n.quadrature.refined().n_nodes), p.refined.residual,
                        p.refined.residual_other_sign, static_cast<double>(p.refined.resolved_sign)});
      signs.insert(p.refined.resolved_sign);
      const double rho = ratio(p.refined.residual, p.base.residual);
      worst_ratio = std::max(worst_ratio, rho);
      r.at_most("refinement_ratio" + tag, criteria::momentum_expansion, rho, n.tolerances.refinement_ratio);
    }
  }
  r.metric("max_residual", worst);
  if (n.refine) r.metric("max_refinement_ratio", worst_ratio);
  r.metric("resolved_sign", static_cast<double>(*signs.begin()));
  r.exactly("distinct_resolved_signs", criteria::momentum_expansion, static_cast<double>(signs.size()), 1.0);
  r.tables.push_back(std::move(t));
}

inline void run_zeno(const RunConfig& cfg, ExperimentResult& r, const Exec& exec) {
  const System sys = in_stage("model", [&] { return System(cfg.build_model()); });
  const RegionSpec region = cfg.region->spec();
  const double total = cfg.numeric.t_end - cfg.numeric.t_start;
  const auto rows = in_stage("zeno products", [&] {
    return zeno_convergence_study(sys, region, total, cfg.numeric.zeno_slices, exec);
  });

  Table t{"zeno", {"K", "delta_t", "frobenius_error", "empirical_order"}, {}};
  for (const auto& row : rows) {
    t.rows.push_back({static_cast<double>(row.slices), row.delta_t, row.frobenius_error, row.empirical_order});
  }
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::string tag = "[K=" + std::to_string(rows[i - 1].slices) + "->" + std::to_string(rows[i].slices) + "]";
    const double rho = rows[i].frobenius_error / rows[i - 1].frobenius_error;
    r.at_most("error_ratio" + tag, criteria::zeno_convergence, rho, cfg.numeric.tolerances.zeno_ratio);
  }

  // least-squares slope of log(error) against log(delta_t)
  double fitted = std::numeric_limits<double>::quiet_NaN();
  if (rows.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& row : rows) {
      const double x = std::log(row.delta_t);
      const double y = std::log(row.frobenius_error);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double k = static_cast<double>(rows.size());
    fitted = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  }
  r.metric("fitted_order", fitted);
  r.metric("final_frobenius_error", rows.back().frobenius_error);
  r.tables.push_back(std::move(t));
}

inline void run_crossing(const RunConfig& cfg, ExperimentResult& r, const Exec& exec) {
  const auto& n = cfg.numeric;
  const System sys = in_stage("model", [&] { return System(cfg.build_model()); });
  const RegionSpec region = cfg.region->spec();
  warn_snap(r, sys, region);
  const Vec psi0 = in_stage("initial state", [&] {
    return n.crossing.state == InitialState::eigenstate ? eigenstate(sys, n.crossing.eigenstate_index)
                                                        : n.source->sample(sys.grid(), sys.params().hbar);
  });
  const PdxTimes times = cfg.times();
  const CrossingIntegrator integrator =
      in_stage("crossing integrator", [&] { return CrossingIntegrator(sys, region, psi0, times, n.quadrature); });
  const RestrictedEvolver restricted(sys.hamiltonian(), sys.grid(), region, sys.params().hbar);
  const auto& mesh = integrator.mesh();
  const std::size_t last = mesh.size() - 1;

  Table t{"crossing", {"t1", "t2", "p_cross", "p_never", "deviation"}, {}};
  double max_offset = 0.0;
  double min_p_cross = std::numeric_limits<double>::infinity();
  double max_p_never = 0.0;
  std::size_t prev = 0;
  for (int k = 1; k <= n.crossing.windows; ++k) {
    const double wanted = times.t_start + (times.t_end - times.t_start) * k / n.crossing.windows;
    const std::size_t b = k == n.crossing.windows ? last : integrator.snap(wanted);
    max_offset = std::max(max_offset, std::abs(mesh[b] - wanted));
    if (b == prev) continue;
    prev = b;
    const double p_cross = norm_sq(sys.grid(), integrator.amplitude_on_nodes(0, b, exec));
    const double p_never = norm_sq(sys.grid(), restricted.evolve(psi0, mesh[b] - times.t_start));
    min_p_cross = std::min(min_p_cross, p_cross);
    max_p_never = std::max(max_p_never, p_never);
    t.rows.push_back({times.t_start, mesh[b], p_cross, p_never, p_cross + p_never - 1.0});
  }

  const Vec full = integrator.amplitude_on_nodes(0, last, exec);
  const std::size_t mid = std::clamp<std::size_t>(integrator.snap(0.5 * (times.t_start + times.t_end)), 1, last - 1);
  const Vec split = integrator.amplitude_on_nodes(0, mid, exec) + integrator.amplitude_on_nodes(mid, last, exec);
  const double additivity = (split - full).cwiseAbs().maxCoeff();

  const double p_cross = norm_sq(sys.grid(), full);
  const double p_never = norm_sq(sys.grid(), restricted.evolve(psi0, times.span()));
  const double deviation = p_cross + p_never - 1.0;
  r.metric("p_cross", p_cross);
  r.metric("p_never", p_never);
  r.metric("deviation", deviation);
  r.metric("window_additivity", additivity);
  r.metric("max_window_offset", max_offset);
  r.metric("quadrature_nodes", static_cast<double>(n.quadrature.n_nodes));

  r.at_most("window_additivity", criteria::sum_rule, additivity, n.tolerances.additivity);
  r.at_most("p_never", criteria::never_cross_bound, max_p_never, 1.0 + 1e-10);
  r.gates.push_back({"p_cross", criteria::crossing_nonnegative, min_p_cross, 0.0, ">=", min_p_cross >= 0.0});
  switch (n.crossing.expect) {
    case DeviationExpectation::conserved:
      r.at_most("abs_deviation", criteria::sum_rule, std::abs(deviation), n.tolerances.deviation);
      break;
    case DeviationExpectation::interference:
      r.above("abs_deviation", criteria::sum_rule, std::abs(deviation), n.tolerances.deviation);
      break;
    case DeviationExpectation::none: break;
  }
  r.tables.push_back(std::move(t));
}

/// Fourth-order central difference of the Euclidean image kernel at the wall,
/// along the normal pointing back toward the source.
inline double wall_normal_derivative(double x0, double a, double tau, double D) {
  const oracle::OracleParams p{1.0, 2.0 * D, 0.0};
  const auto g = [&](double x) {
    return oracle::free_kernel(x, x0, tau, oracle::Sector::euclidean, p).real() -
           oracle::free_kernel(x, 2.0 * a - x0, tau, oracle::Sector::euclidean, p).real();
  };
  const double h = 1e-3 * std::sqrt(2.0 * D * tau);
  const double dx = (-g(a + 2 * h) + 8 * g(a + h) - 8 * g(a - h) + g(a - 2 * h)) / (12 * h);
  return x0 < a ? -dx : dx;
}

inline void run_oracle_suite(const RunConfig& cfg, ExperimentResult& r, const Exec& exec) {
  const auto& tol = cfg.numeric.tolerances;
  using oracle::Sector;

  // Euclidean point-to-point expansion over a seeded sweep
  struct Sample {
    double x_from, a, x_to, tau, D;
  };
  std::mt19937 rng(cfg.numeric.oracle.sweep_seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Sample> samples;
  for (int k = 0; k < cfg.numeric.oracle.sweep_count; ++k) {
    Sample s{};
    s.a = -1.0 + 2.0 * u(rng);
    s.x_from = s.a - 0.2 - 2.0 * u(rng);
    s.x_to = s.a + 0.2 + 2.0 * u(rng);
    s.tau = 0.1 + 3.0 * u(rng);
    s.D = 0.1 + 2.0 * u(rng);
    samples.push_back(s);
  }
  const auto checks = parallel_map<oracle::EuclideanPdxResult>(samples.size(), exec, [&](std::size_t i) {
    const auto& s = samples[i];
    return in_stage("euclidean sweep", [&] { return oracle::euclidean_pdx_check(s.x_from, s.a, s.x_to, s.tau, s.D); });
  });
  Table sweep{"euclidean_sweep", {"x_from", "a", "x_to", "tau", "D", "lhs", "rhs", "residual"}, {}};
  double worst = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    sweep.rows.push_back({s.x_from, s.a, s.x_to, s.tau, s.D, checks[i].lhs, checks[i].rhs, checks[i].residual});
    worst = std::max(worst, checks[i].residual);
  }
  r.metric("euclidean_max_residual", worst);
  r.at_most("euclidean_max_residual", criteria::euclidean_expansion, worst, tol.euclidean);
  r.tables.push_back(std::move(sweep));

  // image kernel vanishes at the wall
  double wall_value = 0.0;
  for (auto sector : {Sector::real_time, Sector::euclidean}) {
    for (double x0 : {-2.0, -0.7, 0.4, 1.9}) {
      for (double t : {0.05, 0.6, 3.0}) {
        wall_value = std::max(wall_value, std::abs(oracle::image_restricted_kernel(0.25, x0, t, 0.25, sector)));
      }
    }
  }
  r.metric("image_wall_value", wall_value);
  r.exactly("image_wall_value", criteria::oracle_consistency, wall_value, 0.0);

  // first-passage density normalizes; tau = exp(s) turns the tau^(-3/2) tail into an exponential one
  double norm_err = 0.0;
  for (double d : {0.5, 1.0, 2.0}) {
    for (double D : {0.25, 1.0}) {
      const double s_hi = std::log(d * d / (std::numbers::pi * D) * 1e16);
      const auto q = adaptive_simpson(
          [&](double s) {
            const double tau = std::exp(s);
            return oracle::brownian_first_passage_density(-d, 0.0, tau, D) * tau;
          },
          std::log(1e-4 * d * d / D), s_hi, 1e-10);
      norm_err = std::max(norm_err, std::abs(q.value - 1.0));
    }
  }
  r.metric("first_passage_normalization_error", norm_err);
  r.at_most("first_passage_normalization_error", criteria::oracle_consistency, norm_err, tol.normalization);

  // f = D dg/dn at the wall
  double flux_err = 0.0;
  for (double D : {0.25, 0.5, 2.0}) {
    for (double tau = 0.05; tau <= 5.0; tau *= 1.37) {
      const double x0 = -0.8;
      const double a = 0.3;
      const double f = oracle::brownian_first_passage_density(x0, a, tau, D);
      flux_err = std::max(flux_err, std::abs(D * wall_normal_derivative(x0, a, tau, D) - f) / f);
    }
  }
  r.metric("flux_identity_relative_error", flux_err);
  r.at_most("flux_identity_relative_error", criteria::oracle_consistency, flux_err, tol.flux_identity);

  // grid propagators against closed-form kernels
  const auto free_fid = in_stage("free kernel fidelity", [&] {
    const System sys(Model{GridModel(512, -20.0, 20.0), PhysicalParams{}, PotentialSpec::free()});
    FidelitySpec spec;
    spec.packet = Packet{0.0, 1.0, 0.0};
    spec.t = 0.2;
    spec.edge_margin = 5.0;
    return free_kernel_fidelity(sys, spec);
  });
  const auto mehler_fid = in_stage("Mehler kernel fidelity", [&] {
    const System sys(Model{GridModel(256, -7.0, 7.0), PhysicalParams{1.0, 1.0, 1.0}, PotentialSpec::harmonic(1.0)});
    FidelitySpec spec;
    spec.packet = Packet{1.0, 1.0, 0.0};
    spec.t = 0.7;
    spec.edge_margin = 14.0 / 8.0;
    return mehler_fidelity(sys, spec);
  });
  r.metric("free_kernel_relative_error", free_fid.relative_error);
  r.metric("mehler_kernel_relative_error", mehler_fid.relative_error);
  r.at_most("free_kernel_relative_error", criteria::fidelity, free_fid.relative_error, tol.free_fidelity);
  r.at_most("mehler_kernel_relative_error", criteria::fidelity, mehler_fid.relative_error, tol.mehler_fidelity);
}

}  // namespace detail

/// Runs one configured experiment. Module errors surface as ExperimentError
/// with the failing stage named.
inline ExperimentResult run_experiment(const RunConfig& cfg, const Exec& exec = {}) {
  ExperimentResult r;
  r.name = cfg.display_name();
  r.experiment = cfg.experiment;
  r.config = cfg;
  const auto start = std::chrono::steady_clock::now();
  const std::string where = to_string(cfg.experiment);
  detail::in_stage(where, [&] {
    switch (cfg.experiment) {
      case Experiment::resolution_identity: detail::run_resolution_identity(cfg, r, exec); break;
      case Experiment::pdx_position: detail::run_pdx_position(cfg, r, exec, false); break;
      case Experiment::pdx_same_side: detail::run_pdx_position(cfg, r, exec, true); break;
      case Experiment::pdx_generalized: detail::run_pdx_generalized(cfg, r, exec); break;
      case Experiment::pdx_momentum: detail::run_pdx_momentum(cfg, r, exec); break;
      case Experiment::zeno_convergence: detail::run_zeno(cfg, r, exec); break;
      case Experiment::crossing_distribution: detail::run_crossing(cfg, r, exec); break;
      case Experiment::oracle_suite: detail::run_oracle_suite(cfg, r, exec); break;
    }
    return 0;
  });
  r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace pdx::cli
