#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "pdx/errors.hpp"
#include "pdx/grid.hpp"
#include "pdx/hilbert.hpp"
#include "pdx/oracles.hpp"
#include "pdx/packets.hpp"
#include "pdx/projectors.hpp"
#include "pdx/restricted.hpp"

namespace pdx {

/// Grid evolution of a Gaussian packet compared with the closed-form kernel
/// integrated against the same packet.
struct FidelityResult {
  double relative_error = 0.0;
  double exact_peak = 0.0;
  std::size_t points_compared = 0;
  std::size_t fine_points = 0;
};

struct FidelitySpec {
  Packet packet{0.0, 1.0, 0.0};
  double t = 0.2;
  /// Nodes closer than this to either end of the grid are skipped.
  double edge_margin = 0.0;
  std::size_t fine_points = 40001;
  /// Half-width of the y integration window, in packet widths.
  double support_widths = 8.0;
};

namespace detail {

inline cplx packet_amplitude(const Packet& p, double x, double hbar) {
  const double u = (x - p.center) / p.width;
  return std::polar(std::exp(-0.5 * u * u), p.momentum * x / hbar);
}

inline Vec raw_packet(const GridModel& grid, const Packet& p, double hbar) {
  Vec v(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t j = 0; j < grid.size(); ++j) v[static_cast<Eigen::Index>(j)] = packet_amplitude(p, grid.x(j), hbar);
  return v;
}

template <class Kernel, class Keep>
FidelityResult compare(const GridModel& grid, const Vec& numeric, const FidelitySpec& spec, double hbar, double y_lo,
                       double y_hi, Kernel&& kernel, Keep&& keep) {
  if (spec.fine_points < 3) throw DomainError("fine integration grid needs at least 3 points");
  const std::size_t m = spec.fine_points;
  const double dy = (y_hi - y_lo) / static_cast<double>(m - 1);
  std::vector<double> ys(m);
  std::vector<cplx> amp(m);
  for (std::size_t k = 0; k < m; ++k) {
    ys[k] = y_lo + static_cast<double>(k) * dy;
    amp[k] = packet_amplitude(spec.packet, ys[k], hbar) * (k == 0 || k + 1 == m ? 0.5 * dy : dy);
  }
  FidelityResult out;
  out.fine_points = m;
  double worst = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double x = grid.x(j);
    if (x < grid.x_min + spec.edge_margin || x > grid.x_max - spec.edge_margin || !keep(j)) continue;
    cplx exact{};
    for (std::size_t k = 0; k < m; ++k) exact += kernel(x, ys[k]) * amp[k];
    worst = std::max(worst, std::abs(numeric[static_cast<Eigen::Index>(j)] - exact));
    out.exact_peak = std::max(out.exact_peak, std::abs(exact));
    ++out.points_compared;
  }
  if (out.points_compared == 0) throw DomainError("no grid points left to compare");
  out.relative_error = worst / out.exact_peak;
  return out;
}

inline oracle::OracleParams oracle_params(const PhysicalParams& p) { return {p.mass, p.hbar, p.omega}; }

}  // namespace detail

/// U(t) on the grid against the free real-time kernel.
inline FidelityResult free_kernel_fidelity(const System& sys, const FidelitySpec& spec) {
  const double hbar = sys.params().hbar;
  const Vec numeric = sys.evolve(detail::raw_packet(sys.grid(), spec.packet, hbar), spec.t);
  const auto op = detail::oracle_params(sys.params());
  const double half = spec.support_widths * spec.packet.width;
  return detail::compare(
      sys.grid(), numeric, spec, hbar, spec.packet.center - half, spec.packet.center + half,
      [&](double x, double y) { return oracle::free_kernel(x, y, spec.t, oracle::Sector::real_time, op); },
      [](std::size_t) { return true; });
}

/// U(t) for the harmonic model against the Mehler kernel.
inline FidelityResult mehler_fidelity(const System& sys, const FidelitySpec& spec) {
  const double hbar = sys.params().hbar;
  const Vec numeric = sys.evolve(detail::raw_packet(sys.grid(), spec.packet, hbar), spec.t);
  const auto op = detail::oracle_params(sys.params());
  const double half = spec.support_widths * spec.packet.width;
  return detail::compare(
      sys.grid(), numeric, spec, hbar, spec.packet.center - half, spec.packet.center + half,
      [&](double x, double y) { return oracle::mehler_kernel(x, y, spec.t, op); }, [](std::size_t) { return true; });
}

/// Dirichlet-restricted evolution against the method-of-images kernel. Only
/// C-bar nodes at least `wall_margin` from the surface are compared.
inline FidelityResult image_kernel_fidelity(const System& sys, const RegionSpec& region, const FidelitySpec& spec,
                                            double wall_margin) {
  const SurfaceGeometry geom = resolve_surface(sys.grid(), region);
  const double hbar = sys.params().hbar;
  const RestrictedEvolver restricted(sys.hamiltonian(), sys.grid(), region, hbar);
  const Vec numeric = restricted.evolve(detail::raw_packet(sys.grid(), spec.packet, hbar), spec.t);
  const auto op = detail::oracle_params(sys.params());
  const double a = geom.used;
  const double half = spec.support_widths * spec.packet.width;
  double lo = spec.packet.center - half;
  double hi = spec.packet.center + half;
  if (geom.c_above) {
    hi = std::min(hi, a);
  } else {
    lo = std::max(lo, a);
  }
  if (!(hi > lo)) throw PreconditionError("packet lies on the wrong side of the wall");
  return detail::compare(
      sys.grid(), numeric, spec, hbar, lo, hi,
      [&](double x, double y) { return oracle::image_restricted_kernel(x, y, spec.t, a, oracle::Sector::real_time, op); },
      [&](std::size_t j) {
        const auto jj = static_cast<Eigen::Index>(j);
        return geom.in_c_bar_interior(jj) && std::abs(sys.grid().x(j) - a) >= wall_margin;
      });
}

}  // namespace pdx
