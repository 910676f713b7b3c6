#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "pdx/errors.hpp"
#include "pdx/grid.hpp"
#include "pdx/hilbert.hpp"
#include "pdx/packets.hpp"
#include "pdx/parallel.hpp"
#include "pdx/pdx.hpp"
#include "pdx/projectors.hpp"
#include "pdx/quadrature.hpp"
#include "pdx/restricted.hpp"

namespace pdx {

/// First-crossing window, t' < t1 < t2 < t''.
struct CrossingWindow {
  double t1 = 0.0;
  double t2 = 0.0;
};

/// A(t1, t2, x'', t'') on the grid nodes x''.
struct CrossingAmplitude {
  Vec values;
  CrossingWindow window;
  double t_final = 0.0;
  /// Window edges after snapping to the time mesh, and the snap offsets.
  double t1_used = 0.0;
  double t2_used = 0.0;
  double t1_offset = 0.0;
  double t2_offset = 0.0;
};

struct SumRuleReport {
  double p_cross = 0.0;
  double p_never = 0.0;
  double deviation = 0.0;
  std::size_t quadrature_nodes = 0;
  QuadratureRule rule = QuadratureRule::simpson;
  std::size_t grid_points = 0;
  double t_start = 0.0;
  double t_final = 0.0;
};

/// Amplitude accumulator over a fixed time mesh on [t', t''].
///
/// Every window is a contiguous run of mesh nodes integrated with the composite
/// rule restricted to that run, so adjacent windows add exactly.
class CrossingIntegrator {
 public:
  static constexpr double kSupportTol = 1e-8;

  CrossingIntegrator(const System& sys, const RegionSpec& region, const Vec& psi0, const PdxTimes& times,
                     const QuadratureSpec& quad)
      : sys_(sys),
        geom_(resolve_surface(sys.grid(), region)),
        restricted_(sys.hamiltonian(), sys.grid(), region, sys.params().hbar),
        times_(times),
        quad_(quad) {
    quad_.validate();
    if (!(times.t_end > times.t_start)) throw DomainError("crossing analysis needs t'' > t'");
    if (psi0.size() != sys.dim()) throw DimensionError("initial state and model orders differ");
    const double total = norm_sq(sys.grid(), psi0);
    if (!(total > 0.0)) throw PreconditionError("initial state is zero");
    const double leak = mass_in_c(sys.grid(), geom_, psi0) / total;
    if (leak > kSupportTol) {
      std::ostringstream os;
      os << "initial state has relative mass " << leak << " in C; it must be supported in C-bar only";
      throw PreconditionError(os.str());
    }
    psi0_ = psi0;
    psi_coeffs_ = restricted_.coefficients(psi0);
    mesh_ = quad_.nodes(times.t_start, times.t_end);
    h_ = (times.t_end - times.t_start) / static_cast<double>(mesh_.size() - 1);
  }

  [[nodiscard]] const std::vector<double>& mesh() const { return mesh_; }

  /// Nearest admissible mesh index; Simpson windows need even indices.
  [[nodiscard]] std::size_t snap(double t) const {
    const double s = (t - times_.t_start) / h_;
    const std::size_t stride = quad_.rule == QuadratureRule::simpson ? 2 : 1;
    const double units = s / static_cast<double>(stride);
    long k = std::lround(units);
    const long last = static_cast<long>((mesh_.size() - 1) / stride);
    k = std::clamp(k, 0L, last);
    return static_cast<std::size_t>(k) * stride;
  }

  /// Integral over mesh nodes [from, to] of g(x''|a) kFluxOrientation (i hbar/2m) d_n chi(a).
  [[nodiscard]] Vec amplitude_on_nodes(std::size_t from, std::size_t to, const Exec& exec = {}) const {
    const auto n = sys_.dim();
    if (to <= from) return Vec::Zero(n);
    const auto w = QuadratureSpec::composite_weights(quad_.rule, to - from + 1, h_);
    const auto& spec = sys_.spectrum();
    const Eigen::Index j = geom_.boundary_index;
    const int dir = geom_.normal_away_from_c_bar();
    const double dx = sys_.grid().dx();
    const double hbar = sys_.params().hbar;
    const cplx prefactor{0.0, hbar / (2.0 * sys_.params().mass)};
    const Vec surface_row = spec.eigenvectors.row(j).adjoint();  // V^H e_a
    const double t_final = times_.t_end;

    // column a of U(t'' - t_sigma), accumulated in the eigenbasis
    const auto parts = parallel_map<Vec>(to - from + 1, exec, [&](std::size_t q) {
      const double t_sigma = mesh_[from + q];
      const double s = t_sigma - times_.t_start;
      const cplx chi0 = restricted_.evolved_entry(psi_coeffs_, s, j);
      const cplx chi1 = restricted_.evolved_entry(psi_coeffs_, s, j - dir);
      const cplx chi2 = restricted_.evolved_entry(psi_coeffs_, s, j - 2 * dir);
      const cplx flux = static_cast<double>(kFluxOrientation) * prefactor * normal_derivative(chi0, chi1, chi2, dx);
      return Vec((w[q] * flux) * phases(spec.eigenvalues, hbar, t_final - t_sigma).cwiseProduct(surface_row));
    });
    Vec acc = Vec::Zero(n);
    for (const auto& p : parts) acc += p;
    // g(x''|a) = U_{x'', a} / dx
    return spec.eigenvectors * acc / dx;
  }

  [[nodiscard]] CrossingAmplitude amplitude(const CrossingWindow& window, const Exec& exec = {}) const {
    if (!(times_.t_start < window.t1 && window.t1 < window.t2 && window.t2 < times_.t_end)) {
      std::ostringstream os;
      os << "window [" << window.t1 << ", " << window.t2 << "] must satisfy t' < t1 < t2 < t'' with t' = "
         << times_.t_start << ", t'' = " << times_.t_end;
      throw DomainError(os.str());
    }
    CrossingAmplitude out;
    out.window = window;
    out.t_final = times_.t_end;
    const std::size_t a = snap(window.t1);
    const std::size_t b = snap(window.t2);
    out.t1_used = mesh_[a];
    out.t2_used = mesh_[b];
    out.t1_offset = out.t1_used - window.t1;
    out.t2_offset = out.t2_used - window.t2;
    out.values = amplitude_on_nodes(a, b, exec);
    return out;
  }

  /// Full interval [t', t''] including both endpoints.
  [[nodiscard]] Vec full_amplitude(const Exec& exec = {}) const { return amplitude_on_nodes(0, mesh_.size() - 1, exec); }

  [[nodiscard]] double never_cross(double t) const {
    return norm_sq(sys_.grid(), restricted_.evolve(psi0_, t));
  }

  [[nodiscard]] const RestrictedEvolver& restricted() const { return restricted_; }

 private:
  const System& sys_;
  SurfaceGeometry geom_;
  RestrictedEvolver restricted_;
  PdxTimes times_;
  QuadratureSpec quad_;
  Vec psi0_;
  Vec psi_coeffs_;
  std::vector<double> mesh_;
  double h_ = 0.0;
};

inline CrossingAmplitude first_crossing_amplitude(const System& sys, const RegionSpec& region, const Vec& psi0,
                                                  const CrossingWindow& window, const PdxTimes& times,
                                                  const QuadratureSpec& quad, const Exec& exec = {}) {
  return CrossingIntegrator(sys, region, psi0, times, quad).amplitude(window, exec);
}

/// p = sum |A(x'')|^2 dx. Not clamped; values above 1 are possible.
inline double candidate_probability(const CrossingAmplitude& amplitude, const GridModel& grid) {
  if (amplitude.values.size() != static_cast<Eigen::Index>(grid.size())) {
    throw DimensionError("amplitude and grid sizes differ");
  }
  return norm_sq(grid, amplitude.values);
}

/// ||G(t'' - t') psi0||^2 with the Dirichlet restricted propagator.
inline double never_cross_probability(const System& sys, const RegionSpec& region, const Vec& psi0,
                                      const PdxTimes& times) {
  if (psi0.size() != sys.dim()) throw DimensionError("initial state and model orders differ");
  if (times.t_end < times.t_start) throw DomainError("times must satisfy t'' >= t'");
  const RestrictedEvolver restricted(sys.hamiltonian(), sys.grid(), region, sys.params().hbar);
  return norm_sq(sys.grid(), restricted.evolve(psi0, times.span()));
}

/// p_cross over the whole interval plus p_never, minus one. Reported, never asserted.
inline SumRuleReport sum_rule_diagnostic(const System& sys, const RegionSpec& region, const Vec& psi0,
                                         const PdxTimes& times, const QuadratureSpec& quad, const Exec& exec = {}) {
  const CrossingIntegrator integrator(sys, region, psi0, times, quad);
  SumRuleReport r;
  r.p_cross = norm_sq(sys.grid(), integrator.full_amplitude(exec));
  r.p_never = never_cross_probability(sys, region, psi0, times);
  r.deviation = r.p_cross + r.p_never - 1.0;
  r.quadrature_nodes = quad.n_nodes;
  r.rule = quad.rule;
  r.grid_points = sys.grid().size();
  r.t_start = times.t_start;
  r.t_final = times.t_end;
  return r;
}

}  // namespace pdx
