#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "pdx/errors.hpp"

namespace pdx {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;
using RealVec = Eigen::VectorXd;

enum class Boundary { hard_wall, periodic };

/// Uniform 1-D grid. Nodes are x_min + j*dx for j = 0..n_points-1.
///
/// Hard-wall grids place the walls one spacing outside the first and last
/// node, so every node is a free unknown. Periodic grids wrap node n-1 to 0.
struct GridModel {
  std::size_t n_points = 0;
  double x_min = 0.0;
  double x_max = 0.0;
  Boundary boundary = Boundary::hard_wall;

  GridModel() = default;
  GridModel(std::size_t n, double lo, double hi, Boundary b = Boundary::hard_wall)
      : n_points(n), x_min(lo), x_max(hi), boundary(b) {
    validate();
  }

  void validate() const {
    if (n_points < 8) {
      throw DomainError("grid needs at least 8 points, got " + std::to_string(n_points));
    }
    if (!(x_max > x_min) || !std::isfinite(x_min) || !std::isfinite(x_max)) {
      throw DomainError("grid requires finite x_min < x_max");
    }
  }

  [[nodiscard]] double dx() const { return (x_max - x_min) / static_cast<double>(n_points - 1); }
  [[nodiscard]] double x(std::size_t j) const { return x_min + static_cast<double>(j) * dx(); }
  [[nodiscard]] std::size_t size() const { return n_points; }

  [[nodiscard]] RealVec nodes() const {
    RealVec out(n_points);
    for (std::size_t j = 0; j < n_points; ++j) out[static_cast<Eigen::Index>(j)] = x(j);
    return out;
  }

  /// Index of the node nearest to `value` (ties go to the lower node).
  [[nodiscard]] std::size_t nearest_node(double value) const {
    const double s = (value - x_min) / dx();
    long j = std::lround(std::floor(s + 0.5 - 1e-12));
    if (j < 0) j = 0;
    if (j >= static_cast<long>(n_points)) j = static_cast<long>(n_points) - 1;
    return static_cast<std::size_t>(j);
  }
};

/// Mass, reduced Planck constant and harmonic frequency (0 means free).
struct PhysicalParams {
  double mass = 1.0;
  double hbar = 1.0;
  double omega = 0.0;

  void validate() const {
    if (!(mass > 0.0) || !std::isfinite(mass)) throw DomainError("mass must be positive");
    if (!(hbar > 0.0) || !std::isfinite(hbar)) throw DomainError("hbar must be positive");
    if (!(omega >= 0.0) || !std::isfinite(omega)) throw DomainError("omega must be non-negative");
  }

  /// Diffusion constant of the Euclidean sector, hbar / 2m.
  [[nodiscard]] double diffusion() const { return hbar / (2.0 * mass); }
};

struct FreePotential {};
struct HarmonicPotential {
  double omega = 1.0;
};
struct CustomPotential {
  std::vector<double> samples;
};

struct PotentialSpec {
  std::variant<FreePotential, HarmonicPotential, CustomPotential> kind = FreePotential{};

  static PotentialSpec free() { return {}; }
  static PotentialSpec harmonic(double omega) { return {HarmonicPotential{omega}}; }
  static PotentialSpec custom(std::vector<double> samples) { return {CustomPotential{std::move(samples)}}; }

  /// Potential values at the grid nodes. Harmonic uses V = m w^2 x^2 / 2.
  [[nodiscard]] RealVec sample(const GridModel& grid, const PhysicalParams& params) const {
    RealVec v = RealVec::Zero(static_cast<Eigen::Index>(grid.size()));
    if (const auto* h = std::get_if<HarmonicPotential>(&kind)) {
      for (std::size_t j = 0; j < grid.size(); ++j) {
        const double x = grid.x(j);
        v[static_cast<Eigen::Index>(j)] = 0.5 * params.mass * h->omega * h->omega * x * x;
      }
    } else if (const auto* c = std::get_if<CustomPotential>(&kind)) {
      if (c->samples.size() != grid.size()) {
        throw DimensionError("custom potential has " + std::to_string(c->samples.size()) +
                             " samples for a grid of " + std::to_string(grid.size()) + " points");
      }
      for (std::size_t j = 0; j < grid.size(); ++j) {
        if (!std::isfinite(c->samples[j])) {
          throw DomainError("custom potential sample " + std::to_string(j) + " is not finite");
        }
        v[static_cast<Eigen::Index>(j)] = c->samples[j];
      }
    }
    return v;
  }

  [[nodiscard]] std::string name() const {
    switch (kind.index()) {
      case 0: return "free";
      case 1: return "harmonic";
      default: return "custom";
    }
  }
};

/// A complete 1-D problem: grid, constants and potential.
struct Model {
  GridModel grid;
  PhysicalParams params;
  PotentialSpec potential;
};

/// Inner product of grid functions, <a|b> = dx * sum conj(a_j) b_j.
inline cplx inner(const GridModel& grid, const Vec& a, const Vec& b) {
  return grid.dx() * a.dot(b);
}

inline double norm_sq(const GridModel& grid, const Vec& a) { return grid.dx() * a.squaredNorm(); }

}  // namespace pdx
