#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "pdx/errors.hpp"
#include "pdx/grid.hpp"
#include "pdx/hilbert.hpp"
#include "pdx/packets.hpp"
#include "pdx/parallel.hpp"
#include "pdx/projectors.hpp"
#include "pdx/quadrature.hpp"
#include "pdx/restricted.hpp"

namespace pdx {

/// Sign that turns surface_flux (normal pointing away from C-bar) into the
/// first-crossing integrand. The exact lattice identity fixes it to -1, i.e. the
/// derivative that enters the expansion is taken along the normal pointing into
/// the restricted region. test_pdx.cpp pins this value.
inline constexpr int kFluxOrientation = -1;

/// Leakage allowed across the surface for smeared packets at t'.
inline constexpr double kLeakTolerance = 1e-6;

/// t' = t_0 < t_1 < ... < t_n = t'' with uniform spacing.
struct SlicingSpec {
  double t_start = 0.0;
  double t_end = 1.0;
  int n_slices = 1;

  void validate() const {
    if (n_slices < 1) throw DomainError("slicing needs n >= 1");
    if (!(t_end > t_start)) throw DomainError("slicing needs t'' > t'");
  }
  [[nodiscard]] double delta_t() const { return (t_end - t_start) / n_slices; }
  [[nodiscard]] double node(int k) const { return t_start + k * delta_t(); }
};

/// The n + 2 terms of the iterated resolution of the identity, each collapsed to
/// a Schrodinger-picture product: P_C, U^-k P_C (U P_bar)^k for k = 1..n, and
/// U^-n P_bar (U P_bar)^n, with U = U(dt).
struct CrossingClassTerms {
  Mat first_term;
  std::vector<Mat> crossing_terms;
  Mat never_term;
  /// U(t'' - t') = U(dt)^n, kept for matrix elements.
  Mat total_propagator;
  Mat projector_c;

  [[nodiscard]] std::size_t term_count() const { return crossing_terms.size() + 2; }

  [[nodiscard]] Mat sum() const {
    Mat s = first_term;
    for (const auto& t : crossing_terms) s += t;
    s += never_term;
    return s;
  }

  [[nodiscard]] double identity_residual() const {
    return max_abs(sum() - Mat::Identity(first_term.rows(), first_term.cols()));
  }
};

inline CrossingClassTerms resolution_of_identity(const Projector& p_c, const PropagatorMatrix& u_step,
                                                 const SlicingSpec& slicing) {
  slicing.validate();
  const auto n = p_c.dim();
  if (u_step.entries.rows() != n || u_step.entries.cols() != n) {
    throw DimensionError("propagator and projector orders differ");
  }
  const double expected = slicing.delta_t();
  if (std::abs(u_step.span() - expected) > 1e-12 * std::max(1.0, std::abs(expected))) {
    std::ostringstream os;
    os << "step propagator spans " << u_step.span() << " but the slicing step is " << expected;
    throw DomainError(os.str());
  }
  const Mat& u = u_step.entries;
  const Mat u_inv = u.adjoint();
  const Mat p_bar = p_c.complement();
  const Mat step = u * p_bar;

  CrossingClassTerms terms;
  terms.projector_c = p_c.matrix;
  terms.first_term = p_c.matrix;
  terms.crossing_terms.reserve(static_cast<std::size_t>(slicing.n_slices));
  Mat chain = Mat::Identity(n, n);     // (U P_bar)^k
  Mat back = Mat::Identity(n, n);      // U^-k
  Mat forward = Mat::Identity(n, n);   // U^k
  for (int k = 1; k <= slicing.n_slices; ++k) {
    chain = (step * chain).eval();
    back = (u_inv * back).eval();
    forward = (u * forward).eval();
    terms.crossing_terms.push_back(back * p_c.matrix * chain);
  }
  terms.never_term = back * p_bar * chain;
  terms.total_propagator = forward;
  return terms;
}

/// Per-class contributions to <final| U(t'' - t') |initial>.
struct CrossingElements {
  cplx first;
  std::vector<cplx> crossing;
  cplx never;
  cplx full;
  std::vector<std::string> warnings;

  [[nodiscard]] cplx sum() const {
    cplx s = first + never;
    for (const auto& c : crossing) s += c;
    return s;
  }
  [[nodiscard]] cplx crossing_sum(std::size_t from, std::size_t to) const {
    cplx s{};
    for (std::size_t k = from; k < to && k < crossing.size(); ++k) s += crossing[k];
    return s;
  }
};

inline CrossingElements crossing_matrix_element(const CrossingClassTerms& terms, const GridModel& grid,
                                                const Vec& final_state, const Vec& initial_state) {
  const auto n = terms.first_term.rows();
  if (final_state.size() != n || initial_state.size() != n) throw DimensionError("state and term orders differ");
  CrossingElements out;
  const double dx = grid.dx();
  const Vec bra = (terms.total_propagator.adjoint() * final_state).eval();
  auto element = [&](const Mat& m) { return dx * bra.dot(m * initial_state); };
  out.first = element(terms.first_term);
  out.crossing.reserve(terms.crossing_terms.size());
  for (const auto& t : terms.crossing_terms) out.crossing.push_back(element(t));
  out.never = element(terms.never_term);
  out.full = dx * final_state.dot(terms.total_propagator * initial_state);

  constexpr double kSupportTol = 1e-8;
  const double init_in_c = norm_sq(grid, terms.projector_c * initial_state);
  const double final_in_c_bar = norm_sq(grid, final_state - terms.projector_c * final_state);
  if (init_in_c > kSupportTol) {
    std::ostringstream os;
    os << "initial state has mass " << init_in_c << " in C; the first term will contribute";
    out.warnings.push_back(os.str());
  }
  if (final_in_c_bar > kSupportTol) {
    std::ostringstream os;
    os << "final state has mass " << final_in_c_bar << " in C-bar; the never-crossing term will contribute";
    out.warnings.push_back(os.str());
  }
  return out;
}

/// One-sided derivative along the outward normal of C-bar from the values at
/// a, a - n dx, a - 2n dx.
inline double normal_derivative_scale(double dx) { return 1.0 / (2.0 * dx); }
inline cplx normal_derivative(cplx at_surface, cplx one_in, cplx two_in, double dx) {
  return (3.0 * at_surface - 4.0 * one_in + two_in) * normal_derivative_scale(dx);
}

/// phi*(a) (i hbar / 2m) n . grad chi (a), n pointing away from C-bar.
/// `phi_conj` holds phi*(x) on the grid; `chi` must vanish at the surface node.
inline cplx surface_flux(const Vec& phi_conj, const Vec& chi, const RegionSpec& region,
                         const PhysicalParams& params, const GridModel& grid) {
  if (region.basis != Basis::position) throw DomainError("surface flux needs a position-basis region");
  const auto n = static_cast<Eigen::Index>(grid.size());
  if (phi_conj.size() != n || chi.size() != n) throw DimensionError("state and grid sizes differ");
  const SurfaceGeometry geom = resolve_surface(grid, region);
  const Eigen::Index j = geom.boundary_index;
  const int dir = geom.normal_away_from_c_bar();
  const Eigen::Index j1 = j - dir;
  const Eigen::Index j2 = j - 2 * dir;
  if (j2 < 0 || j2 >= n || !geom.in_c_bar_interior(j1) || !geom.in_c_bar_interior(j2)) {
    throw ResolutionError("surface flux needs at least 3 nodes on the restricted side of the surface");
  }
  const double scale = std::max(1.0, chi.cwiseAbs().maxCoeff());
  if (std::abs(chi[j]) > 1e-12 * scale) {
    throw PreconditionError("chi must vanish at the surface node");
  }
  const cplx deriv = normal_derivative(chi[j], chi[j1], chi[j2], grid.dx());
  const cplx prefactor{0.0, params.hbar / (2.0 * params.mass)};
  return phi_conj[j] * prefactor * deriv;
}

/// Smeared two-sided comparison of the expansion.
struct PdxComparison {
  cplx lhs;
  cplx rhs;
  double residual = 0.0;
  cplx flux_term;
  cplx restricted_term;
  double initial_leak = 0.0;
  double final_leak = 0.0;
  double edge_amplitude = 0.0;
  std::size_t quadrature_nodes = 0;
};

struct PdxTimes {
  double t_start = 0.0;
  double t_end = 1.0;
  [[nodiscard]] double span() const { return t_end - t_start; }
};

namespace detail {

/// Integral over t_sigma in [t', t''] of <f|U(t'' - t_sigma)|x_a> (i hbar / 2m) d_n chi(a, t_sigma)
/// with chi = G(t_sigma - t') |i>, n away from C-bar. The caller applies kFluxOrientation.
inline cplx flux_integral(const System& sys, const RestrictedEvolver& restricted, const SurfaceGeometry& geom,
                          const Vec& final_state, const Vec& initial_state, const PdxTimes& times,
                          const QuadratureSpec& quad, const Exec& exec) {
  const double span = times.span();
  const auto nodes = quad.nodes(0.0, span);
  const auto weights = quad.weights(0.0, span);
  const Vec f_coeffs = sys.to_eigenbasis(final_state);
  const Vec i_coeffs = restricted.coefficients(initial_state);
  const Eigen::Index j = geom.boundary_index;
  const int dir = geom.normal_away_from_c_bar();
  const double dx = sys.grid().dx();
  const cplx prefactor{0.0, sys.params().hbar / (2.0 * sys.params().mass)};

  const auto values = parallel_map<cplx>(nodes.size(), exec, [&](std::size_t k) {
    const double s = nodes[k];
    // phi*(a) = <f|U(T - s)|x_a> = conj((U(s - T) f)_a)
    const cplx phi_conj = std::conj(sys.evolved_entry(f_coeffs, s - span, j));
    const cplx chi0 = restricted.evolved_entry(i_coeffs, s, j);
    const cplx chi1 = restricted.evolved_entry(i_coeffs, s, j - dir);
    const cplx chi2 = restricted.evolved_entry(i_coeffs, s, j - 2 * dir);
    return phi_conj * prefactor * normal_derivative(chi0, chi1, chi2, dx);
  });
  cplx total{};
  for (std::size_t k = 0; k < values.size(); ++k) total += weights[k] * values[k];
  return total;
}

inline void check_packets(const System& sys, const SurfaceGeometry& geom, const Packet& src, const Packet& dst,
                          bool same_side) {
  const double dx = sys.grid().dx();
  if (!(src.width > 2.0 * dx) || !(dst.width > 2.0 * dx)) {
    std::ostringstream os;
    os << "smearing widths must exceed 2 dx = " << 2.0 * dx;
    throw PreconditionError(os.str());
  }
  const auto side_c_bar = [&](double x) { return geom.c_above ? x < geom.used : x > geom.used; };
  if (!side_c_bar(src.center)) throw PreconditionError("source packet must be centered in C-bar");
  if (same_side ? !side_c_bar(dst.center) : side_c_bar(dst.center)) {
    throw PreconditionError(same_side ? "target packet must be centered in C-bar"
                                      : "target packet must be centered in C");
  }
  if (geom.c_empty() && !same_side) throw PreconditionError("region C is empty; no surface to cross");
}

inline PdxComparison assemble(const System& sys, const RegionSpec& region, const Packet& src, const Packet& dst,
                              const PdxTimes& times, const QuadratureSpec& quad, bool same_side, const Exec& exec) {
  if (region.basis != Basis::position) throw DomainError("spatial expansion needs a position-basis region");
  quad.validate();
  if (!(times.t_end >= times.t_start)) throw DomainError("times must satisfy t'' >= t'");
  const SurfaceGeometry geom = resolve_surface(sys.grid(), region);
  check_packets(sys, geom, src, dst, same_side);
  const GridModel& grid = sys.grid();
  const double hbar = sys.params().hbar;
  const Vec initial = src.sample(grid, hbar);
  const Vec final_state = dst.sample(grid, hbar);

  PdxComparison out;
  out.quadrature_nodes = quad.n_nodes;
  out.initial_leak = mass_in_c(grid, geom, initial);
  out.final_leak = same_side ? mass_in_c(grid, geom, final_state) : mass_in_c_bar(grid, geom, final_state);
  // the same-side identity holds for any target, so only the source is gated there
  const bool target_gated = !same_side;
  if (!geom.c_empty() && (out.initial_leak > kLeakTolerance || (target_gated && out.final_leak > kLeakTolerance))) {
    std::ostringstream os;
    os << "packets leak across the surface at t' (source " << out.initial_leak << ", target " << out.final_leak
       << ", allowed " << kLeakTolerance << ")";
    throw PreconditionError(os.str());
  }

  const double span = times.span();
  const Vec evolved = sys.evolve(initial, span);
  out.edge_amplitude = edge_amplitude_ratio(evolved);
  out.lhs = inner(grid, final_state, evolved);

  const RestrictedEvolver restricted(sys.hamiltonian(), grid, region, hbar);
  if (span > 0.0 && !geom.c_empty()) {
    out.flux_term = static_cast<double>(kFluxOrientation) *
                    flux_integral(sys, restricted, geom, final_state, initial, times, quad, exec);
  }
  if (same_side) out.restricted_term = inner(grid, final_state, restricted.evolve(initial, span));
  out.rhs = out.flux_term + out.restricted_term;
  out.residual = std::abs(out.lhs - out.rhs) / std::abs(out.lhs);
  return out;
}

}  // namespace detail

/// Source packet in C-bar, target packet in C: lhs = <f|U|i>, rhs = flux integral.
inline PdxComparison pdx_assemble_opposite(const System& sys, const RegionSpec& region, const Packet& source,
                                           const Packet& target, const PdxTimes& times, const QuadratureSpec& quad,
                                           const Exec& exec = {}) {
  return detail::assemble(sys, region, source, target, times, quad, false, exec);
}

/// Both packets in C-bar: rhs = <f|G(T)|i> + flux integral.
inline PdxComparison pdx_assemble_same_side(const System& sys, const RegionSpec& region, const Packet& source,
                                            const Packet& target, const PdxTimes& times, const QuadratureSpec& quad,
                                            const Exec& exec = {}) {
  return detail::assemble(sys, region, source, target, times, quad, true, exec);
}

/// (i / hbar) [H, P].
inline Mat projector_rate(const HermitianMatrix& h, const Mat& p, double hbar) {
  return cplx{0.0, 1.0 / hbar} * (h.matrix() * p - p * h.matrix());
}

/// Restricted propagator matching a projector: Dirichlet walls for position
/// regions, compression onto range(P_bar) for momentum regions.
inline RestrictedEvolver restricted_for(const System& sys, const Projector& p_c) {
  if (p_c.dim() != sys.dim()) throw DimensionError("projector and model orders differ");
  if (p_c.region.basis == Basis::position) {
    if (!p_c.surface) throw UnsupportedError("position projector carries no surface geometry");
    return RestrictedEvolver(sys.hamiltonian(), sys.grid(), p_c.region, sys.params().hbar);
  }
  if (sys.grid().boundary != Boundary::periodic) {
    throw UnsupportedError("momentum restriction needs a periodic grid");
  }
  return RestrictedEvolver(sys.hamiltonian(), p_c, sys.params().hbar);
}

/// Both sides of the operator identity applied to a block of columns.
struct GeneralizedComparison {
  Mat lhs;
  Mat rhs;
  Mat projected_term;
  Mat flux_term;
  Mat restricted_term;
  /// ||lhs - rhs||_max / ||lhs||_max
  double residual = 0.0;
  double absolute_residual = 0.0;

  /// |<f|(lhs - rhs) e_c>| / |<f| lhs e_c>| for column c.
  [[nodiscard]] double element_residual(const GridModel& grid, const Vec& final_state, Eigen::Index c = 0) const {
    const cplx l = inner(grid, final_state, lhs.col(c));
    const cplx r = inner(grid, final_state, rhs.col(c));
    return std::abs(l - r) / std::abs(l);
  }
};

/// U(T) S versus U(T) P_C S + int U(T - s) (i/hbar)[H, P_C] G(s) S ds + G(T) S
/// for columns S, with the commutator formed as an explicit matrix product.
inline GeneralizedComparison generalized_pdx(const System& sys, const Projector& p_c, const PdxTimes& times,
                                             const QuadratureSpec& quad, const Mat& columns, const Exec& exec = {}) {
  quad.validate();
  if (columns.rows() != sys.dim()) throw DimensionError("column block and model orders differ");
  if (!(times.t_end >= times.t_start)) throw DomainError("times must satisfy t'' >= t'");
  const RestrictedEvolver restricted = restricted_for(sys, p_c);
  const double hbar = sys.params().hbar;
  const double span = times.span();
  const auto& spec = sys.spectrum();
  const Mat rate_in_eigenbasis = spec.eigenvectors.adjoint() * projector_rate(sys.hamiltonian(), p_c.matrix, hbar);

  GeneralizedComparison out;
  const auto k = columns.cols();
  out.lhs.resize(sys.dim(), k);
  out.projected_term.resize(sys.dim(), k);
  out.restricted_term.resize(sys.dim(), k);
  for (Eigen::Index c = 0; c < k; ++c) {
    out.lhs.col(c) = sys.evolve(columns.col(c), span);
    out.projected_term.col(c) = sys.evolve(p_c.matrix * columns.col(c), span);
    out.restricted_term.col(c) = restricted.evolve(columns.col(c), span);
  }

  Mat acc = Mat::Zero(sys.dim(), k);
  if (span > 0.0) {
    const auto nodes = quad.nodes(0.0, span);
    const auto weights = quad.weights(0.0, span);
    const auto terms = parallel_map<Mat>(nodes.size(), exec, [&](std::size_t q) {
      const double s = nodes[q];
      Mat chi(sys.dim(), k);
      for (Eigen::Index c = 0; c < k; ++c) chi.col(c) = restricted.evolve(columns.col(c), s);
      const Vec ph = phases(spec.eigenvalues, hbar, span - s);
      return Mat(ph.asDiagonal() * (rate_in_eigenbasis * chi));
    });
    for (std::size_t q = 0; q < terms.size(); ++q) acc += weights[q] * terms[q];
  }
  out.flux_term = spec.eigenvectors * acc;
  out.rhs = out.projected_term + out.flux_term + out.restricted_term;
  out.absolute_residual = max_abs(out.lhs - out.rhs);
  out.residual = out.absolute_residual / max_abs(out.lhs);
  return out;
}

/// Relative max-norm residual of the operator identity for the given columns.
inline double generalized_pdx_residual(const System& sys, const Projector& p_c, const PdxTimes& times,
                                       const QuadratureSpec& quad, const Mat& columns, const Exec& exec = {}) {
  return generalized_pdx(sys, p_c, times, quad, columns, exec).residual;
}

}  // namespace pdx
