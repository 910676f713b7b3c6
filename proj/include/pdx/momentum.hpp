#pragma once

#include <cmath>
#include <vector>

#include "pdx/errors.hpp"
#include "pdx/grid.hpp"
#include "pdx/hilbert.hpp"
#include "pdx/packets.hpp"
#include "pdx/pdx.hpp"
#include "pdx/projectors.hpp"
#include "pdx/restricted.hpp"

namespace pdx {

/// The oscillator in the momentum representation, rewritten as a position-form
/// problem: p plays the coordinate, x^2 becomes -hbar^2 d^2/dp^2, so the kinetic
/// mass is 1 / (m w^2) and the potential is p^2 / 2m.
struct DualModel {
  PhysicalParams original;
  double mapped_mass = 1.0;
  double mapped_omega = 1.0;
  /// Grid over momentum values p.
  GridModel grid;

  [[nodiscard]] PhysicalParams mapped_params() const { return {mapped_mass, original.hbar, mapped_omega}; }

  [[nodiscard]] Model model() const {
    std::vector<double> v(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const double p = grid.x(j);
      v[j] = p * p / (2.0 * original.mass);
    }
    return Model{grid, mapped_params(), PotentialSpec::custom(std::move(v))};
  }

  /// C = {p > 0} with p = 0 assigned to C; C-bar = {p < 0}.
  [[nodiscard]] static RegionSpec region() { return RegionSpec::position(0.0, Side::above, Membership::C); }
};

inline DualModel dual_map(const PhysicalParams& params, const GridModel& momentum_grid) {
  params.validate();
  if (!(params.omega > 0.0)) {
    throw UnsupportedError("momentum expansion needs omega > 0: with V = 0 the projector onto p > 0 is conserved");
  }
  momentum_grid.validate();
  DualModel d;
  d.original = params;
  d.mapped_mass = 1.0 / (params.mass * params.omega * params.omega);
  // p^2 / 2m = mu W^2 p^2 / 2 gives W = 1 / sqrt(m mu)
  d.mapped_omega = 1.0 / std::sqrt(params.mass * d.mapped_mass);
  d.grid = momentum_grid;
  return d;
}

/// Natural momentum scale sqrt(hbar m w) of the oscillator.
inline double natural_momentum(const PhysicalParams& params) {
  return std::sqrt(params.hbar * params.mass * params.omega);
}

inline RestrictedPropagator momentum_restricted_propagator(const System& dual_system, double t) {
  RestrictedPropagator out =
      dirichlet_restricted(dual_system.hamiltonian(), dual_system.grid(), DualModel::region(), dual_system.params(), t);
  out.region = RegionSpec::momentum();
  return out;
}

inline RestrictedPropagator momentum_restricted_propagator(const DualModel& dual, double t) {
  return momentum_restricted_propagator(System(dual.model()), t);
}

struct MomentumPdxResult {
  cplx lhs;
  cplx rhs;
  double residual = 0.0;
  /// Sign s in rhs = s (i m w^2 hbar / 2) int g dg_r/dp; chosen to minimize the residual.
  int resolved_sign = 0;
  double residual_other_sign = 0.0;
  /// The unsigned integral (i m w^2 hbar / 2) int g dg_r/dp dt.
  cplx flux_integral;
  double initial_leak = 0.0;
  double final_leak = 0.0;
  double edge_amplitude = 0.0;
};

/// Smeared momentum-space expansion between packets at p_src < 0 and p_dst > 0.
inline MomentumPdxResult momentum_pdx_residual(const System& dual_system, const Packet& source, const Packet& target,
                                               const PdxTimes& times, const QuadratureSpec& quad,
                                               const Exec& exec = {}) {
  if (!(source.center < 0.0 && target.center > 0.0)) {
    throw PreconditionError("momentum packets must sit at p_src < 0 < p_dst");
  }
  quad.validate();
  const RegionSpec region = DualModel::region();
  const GridModel& grid = dual_system.grid();
  const SurfaceGeometry geom = resolve_surface(grid, region);
  detail::check_packets(dual_system, geom, source, target, false);
  const double hbar = dual_system.params().hbar;
  const Vec initial = source.sample(grid, hbar);
  const Vec final_state = target.sample(grid, hbar);

  MomentumPdxResult out;
  out.initial_leak = mass_in_c(grid, geom, initial);
  out.final_leak = mass_in_c_bar(grid, geom, final_state);
  if (out.initial_leak > kLeakTolerance || out.final_leak > kLeakTolerance) {
    throw PreconditionError("momentum packets leak across p = 0 at t'");
  }
  const Vec evolved = dual_system.evolve(initial, times.span());
  out.edge_amplitude = edge_amplitude_ratio(evolved);
  out.lhs = inner(grid, final_state, evolved);
  if (times.span() > 0.0) {
    const RestrictedEvolver restricted(dual_system.hamiltonian(), grid, region, hbar);
    out.flux_integral = detail::flux_integral(dual_system, restricted, geom, final_state, initial, times, quad, exec);
  }
  const double plus = std::abs(out.lhs - out.flux_integral) / std::abs(out.lhs);
  const double minus = std::abs(out.lhs + out.flux_integral) / std::abs(out.lhs);
  out.resolved_sign = minus <= plus ? -1 : +1;
  out.rhs = static_cast<double>(out.resolved_sign) * out.flux_integral;
  out.residual = std::min(plus, minus);
  out.residual_other_sign = std::max(plus, minus);
  return out;
}

inline MomentumPdxResult momentum_pdx_residual(const DualModel& dual, const Packet& source, const Packet& target,
                                               const PdxTimes& times, const QuadratureSpec& quad,
                                               const Exec& exec = {}) {
  return momentum_pdx_residual(System(dual.model()), source, target, times, quad, exec);
}

/// Position-space wavefunction whose momentum amplitude is the Gaussian
/// exp(-(p - p0)^2 / (2 w^2)): a packet at x = 0 with width hbar / w and mean momentum p0.
inline Packet momentum_packet_in_position(const Packet& momentum_packet, double hbar) {
  return Packet{0.0, hbar / momentum_packet.width, momentum_packet.center};
}

}  // namespace pdx
