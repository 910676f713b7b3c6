#pragma once

#include <cmath>

#include "pdx/grid.hpp"
#include "pdx/projectors.hpp"

namespace pdx {

/// Gaussian wavepacket psi(x) ~ exp(-(x - center)^2 / (2 width^2) + i k x / hbar),
/// normalized on the grid. `width` is the amplitude width; |psi|^2 has standard
/// deviation width / sqrt(2).
struct Packet {
  double center = 0.0;
  double width = 0.5;
  double momentum = 0.0;

  [[nodiscard]] Vec sample(const GridModel& grid, double hbar = 1.0) const {
    if (!(width > 0.0)) throw DomainError("packet width must be positive");
    const auto n = static_cast<Eigen::Index>(grid.size());
    Vec v(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double x = grid.x(static_cast<std::size_t>(j));
      const double u = (x - center) / width;
      v[j] = std::polar(std::exp(-0.5 * u * u), momentum * x / hbar);
    }
    const double nrm = std::sqrt(norm_sq(grid, v));
    if (!(nrm > 0.0)) throw DomainError("packet has no mass on the grid");
    return v / nrm;
  }
};

/// Mass of `v` on the nodes where `mask(j)` holds.
template <class Mask>
double mass_where(const GridModel& grid, const Vec& v, Mask&& mask) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (mask(j)) s += std::norm(v[j]);
  }
  return s * grid.dx();
}

/// Mass of `v` on C (the far side of the surface from the restricted region).
inline double mass_in_c(const GridModel& grid, const SurfaceGeometry& geom, const Vec& v) {
  return mass_where(grid, v, [&](Eigen::Index j) { return geom.in_c(j); });
}

inline double mass_in_c_bar(const GridModel& grid, const SurfaceGeometry& geom, const Vec& v) {
  return mass_where(grid, v, [&](Eigen::Index j) { return geom.in_c_bar(j); });
}

/// max |psi| at the two end nodes relative to max |psi|.
inline double edge_amplitude_ratio(const Vec& v) {
  const double peak = v.cwiseAbs().maxCoeff();
  if (!(peak > 0.0)) return 0.0;
  return std::max(std::abs(v[0]), std::abs(v[v.size() - 1])) / peak;
}

}  // namespace pdx
