#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <vector>

#include "pdx/errors.hpp"
#include "pdx/grid.hpp"
#include "pdx/hilbert.hpp"

namespace pdx {

enum class Basis { position, momentum };
enum class Side { above, below };
enum class Membership { C, C_bar };

/// Where the surface sits and which side is C.
///
/// Position regions snap the requested boundary to the nearest grid node; the
/// offset is kept so reports can show it. Momentum regions always split at p = 0.
struct RegionSpec {
  Basis basis = Basis::position;
  double boundary = 0.0;
  Side side_of_c = Side::above;
  Membership boundary_node = Membership::C;

  static RegionSpec position(double a, Side side = Side::above, Membership node = Membership::C) {
    return {Basis::position, a, side, node};
  }
  static RegionSpec momentum() { return {Basis::momentum, 0.0, Side::above, Membership::C_bar}; }
};

/// Resolved node-level geometry of a position region on a particular grid.
struct SurfaceGeometry {
  Eigen::Index boundary_index = 0;
  double requested = 0.0;
  double used = 0.0;
  bool c_above = true;
  bool boundary_in_c = true;
  Eigen::Index n = 0;

  [[nodiscard]] double snap_offset() const { return std::abs(requested - used); }

  [[nodiscard]] bool in_c(Eigen::Index j) const {
    if (j == boundary_index) return boundary_in_c;
    return c_above ? j > boundary_index : j < boundary_index;
  }
  [[nodiscard]] bool in_c_bar(Eigen::Index j) const { return !in_c(j); }
  [[nodiscard]] bool c_empty() const {
    if (boundary_in_c) return false;
    return c_above ? boundary_index == n - 1 : boundary_index == 0;
  }
  /// C-bar without the surface node: the support of Dirichlet-restricted states.
  /// With C empty there is no surface and the whole grid is interior.
  [[nodiscard]] bool in_c_bar_interior(Eigen::Index j) const {
    if (c_empty()) return true;
    return j != boundary_index && in_c_bar(j);
  }

  /// Outward normal of the restricted region C-bar, as a grid direction (+1 or -1).
  [[nodiscard]] int normal_away_from_c_bar() const { return c_above ? +1 : -1; }

  [[nodiscard]] std::vector<Eigen::Index> c_bar_interior_nodes() const {
    std::vector<Eigen::Index> out;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (in_c_bar_interior(j)) out.push_back(j);
    }
    return out;
  }
};

inline SurfaceGeometry resolve_surface(const GridModel& grid, const RegionSpec& region) {
  if (region.basis != Basis::position) throw DomainError("surface geometry needs a position-basis region");
  grid.validate();
  if (!(region.boundary >= grid.x_min && region.boundary <= grid.x_max)) {
    std::ostringstream os;
    os << "surface a = " << region.boundary << " lies outside the grid [" << grid.x_min << ", " << grid.x_max << "]";
    throw DomainError(os.str());
  }
  SurfaceGeometry g;
  g.boundary_index = static_cast<Eigen::Index>(grid.nearest_node(region.boundary));
  g.requested = region.boundary;
  g.used = grid.x(static_cast<std::size_t>(g.boundary_index));
  g.c_above = region.side_of_c == Side::above;
  g.boundary_in_c = region.boundary_node == Membership::C;
  g.n = static_cast<Eigen::Index>(grid.size());
  return g;
}

/// Orthogonal projector onto a region, stored densely.
struct Projector {
  Mat matrix;
  RegionSpec region;
  Eigen::Index rank = 0;
  /// Present for position projectors.
  std::optional<SurfaceGeometry> surface;

  [[nodiscard]] Eigen::Index dim() const { return matrix.rows(); }
  [[nodiscard]] Mat complement() const { return Mat::Identity(dim(), dim()) - matrix; }
  [[nodiscard]] double idempotence_defect() const { return max_abs(matrix * matrix - matrix); }
};

/// Diagonal 0/1 projector onto C for a position region.
inline Projector position_projector(const GridModel& grid, const RegionSpec& region) {
  if (region.basis != Basis::position) throw DomainError("position_projector needs a position-basis region");
  const SurfaceGeometry geom = resolve_surface(grid, region);
  Projector p;
  p.region = region;
  p.surface = geom;
  p.matrix = Mat::Zero(geom.n, geom.n);
  for (Eigen::Index j = 0; j < geom.n; ++j) {
    if (geom.in_c(j)) {
      p.matrix(j, j) = 1.0;
      ++p.rank;
    }
  }
  return p;
}

/// Discrete plane wave with integer wavenumber index k on an n-point periodic grid,
/// normalized to unit Euclidean length.
inline Vec plane_wave(Eigen::Index n, long k) {
  Vec v(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    const double arg = 2.0 * std::numbers::pi * static_cast<double>(k) * static_cast<double>(j) / static_cast<double>(n);
    v[j] = std::polar(scale, arg);
  }
  return v;
}

/// Momentum of DFT mode k on a periodic grid of period n*dx.
inline double mode_momentum(const GridModel& grid, long k, double hbar) {
  return 2.0 * std::numbers::pi * hbar * static_cast<double>(k) / (static_cast<double>(grid.size()) * grid.dx());
}

/// Projector onto p > 0: the DFT modes k = 1 .. floor((n-1)/2).
/// The zero mode and, for even n, the Nyquist mode belong to C-bar.
inline Projector momentum_projector(const GridModel& grid) {
  grid.validate();
  if (grid.boundary != Boundary::periodic) {
    throw PreconditionError("momentum projector needs a periodic grid; rebuild the model with boundary = periodic");
  }
  const auto n = static_cast<Eigen::Index>(grid.size());
  const long positive = static_cast<long>((n - 1) / 2);
  Mat modes(n, positive);
  for (long k = 1; k <= positive; ++k) modes.col(k - 1) = plane_wave(n, k);
  Projector p;
  p.region = RegionSpec::momentum();
  p.rank = positive;
  p.matrix = modes * modes.adjoint();
  return p;
}

/// P(t) = U(t)^H P U(t).
inline HermitianMatrix heisenberg_projector(const Projector& p, const PropagatorMatrix& u) {
  if (u.entries.rows() != p.dim() || u.entries.cols() != p.dim()) {
    throw DimensionError("propagator and projector orders differ");
  }
  return HermitianMatrix(u.entries.adjoint() * p.matrix * u.entries);
}

}  // namespace pdx
