#pragma once

// Closed-form kernels used as ground truth. Nothing here touches the grid code.

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "pdx/errors.hpp"
#include "pdx/quadrature.hpp"

namespace pdx::oracle {

using cplx = std::complex<double>;

enum class Sector { real_time, euclidean };

struct OracleParams {
  double mass = 1.0;
  double hbar = 1.0;
  double omega = 0.0;

  void validate() const {
    if (!(mass > 0.0) || !(hbar > 0.0)) throw DomainError("oracle needs positive mass and hbar");
    if (!(omega >= 0.0)) throw DomainError("oracle needs omega >= 0");
  }
  [[nodiscard]] double diffusion() const { return hbar / (2.0 * mass); }
};

struct KernelSample {
  double x_to = 0.0;
  double x_from = 0.0;
  double t = 0.0;
  cplx value;
};

/// Heat kernel with diffusion constant D: (4 pi D tau)^(-1/2) exp(-u^2 / (4 D tau)).
inline double heat_kernel(double u, double tau, double diffusion) {
  return std::exp(-u * u / (4.0 * diffusion * tau)) / std::sqrt(4.0 * std::numbers::pi * diffusion * tau);
}

/// Free propagator. Real time: (m / 2 pi i hbar t)^(1/2) exp(i m u^2 / 2 hbar t);
/// Euclidean: (m / 2 pi hbar t)^(1/2) exp(-m u^2 / 2 hbar t).
inline cplx free_kernel(double x_to, double x_from, double t, Sector sector, const OracleParams& p = {}) {
  p.validate();
  if (!(t > 0.0)) throw DomainError("free kernel needs t > 0");
  const double u = x_to - x_from;
  if (sector == Sector::euclidean) return heat_kernel(u, t, p.diffusion());
  const double amp = std::sqrt(p.mass / (2.0 * std::numbers::pi * p.hbar * t));
  const double phase = p.mass * u * u / (2.0 * p.hbar * t) - std::numbers::pi / 4.0;
  return std::polar(amp, phase);
}

/// Method-of-images kernel with a Dirichlet wall at a; both points on one side.
inline cplx image_restricted_kernel(double x_to, double x_from, double t, double wall, Sector sector,
                                    const OracleParams& p = {}) {
  if ((x_to - wall) * (x_from - wall) < 0.0) {
    throw DomainError("image kernel needs both points on the same side of the wall");
  }
  if (x_to == wall || x_from == wall) return {0.0, 0.0};
  return free_kernel(x_to, x_from, t, sector, p) - free_kernel(x_to, 2.0 * wall - x_from, t, sector, p);
}

/// Derivative in x_to of the Euclidean image kernel at the wall:
/// d/dx [K(x - x0) - K(x - 2a + x0)] at x = a, which is -(a - x0)/(D tau) K(a - x0).
inline double euclidean_image_wall_slope(double x_from, double wall, double tau, double diffusion) {
  const double d = wall - x_from;
  return -(d / (diffusion * tau)) * heat_kernel(d, tau, diffusion);
}

/// Harmonic oscillator propagator with the Maslov phase for t past caustics.
inline cplx mehler_kernel(double x_to, double x_from, double t, const OracleParams& p) {
  p.validate();
  if (!(p.omega > 0.0)) throw DomainError("Mehler kernel needs omega > 0");
  if (!(t > 0.0)) throw DomainError("Mehler kernel needs t > 0");
  const double wt = p.omega * t;
  const double k = std::round(wt / std::numbers::pi);
  if (std::abs(wt - k * std::numbers::pi) < 1e-12 * std::max(1.0, wt)) {
    std::ostringstream os;
    os << "Mehler kernel is singular at the caustic t = " << k * std::numbers::pi / p.omega;
    throw DomainError(os.str());
  }
  const double s = std::sin(wt);
  const double c = std::cos(wt);
  const double crossings = std::floor(wt / std::numbers::pi);
  const double amp = std::sqrt(p.mass * p.omega / (2.0 * std::numbers::pi * p.hbar * std::abs(s)));
  const double phase = p.mass * p.omega / (2.0 * p.hbar * s) * ((x_to * x_to + x_from * x_from) * c - 2.0 * x_to * x_from) -
                       std::numbers::pi / 4.0 - std::numbers::pi / 2.0 * crossings;
  return std::polar(amp, phase);
}

/// Density of the first arrival at a of Brownian motion started at x_from < a:
/// (a - x0) / sqrt(4 pi D tau^3) exp(-(a - x0)^2 / (4 D tau)).
inline double brownian_first_passage_density(double x_from, double wall, double tau, double diffusion) {
  if (!(x_from < wall)) throw DomainError("first-passage density needs x_from < a");
  if (!(tau > 0.0)) throw DomainError("first-passage density needs tau > 0");
  if (!(diffusion > 0.0)) throw DomainError("first-passage density needs D > 0");
  const double d = wall - x_from;
  return d / std::sqrt(4.0 * std::numbers::pi * diffusion * tau * tau * tau) * std::exp(-d * d / (4.0 * diffusion * tau));
}

/// Mode of the first-passage density, (a - x0)^2 / (6 D).
inline double first_passage_mode(double x_from, double wall, double diffusion) {
  const double d = wall - x_from;
  return d * d / (6.0 * diffusion);
}

struct EuclideanPdxResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
  std::size_t intervals = 0;
};

struct AdaptiveSpec {
  double rel_tol = 1e-8;
  std::size_t max_intervals = std::size_t{1} << 16;
};

/// K(x_to - x_from, tau) against int_0^tau f(tau_s) K(x_to - a, tau - tau_s) dtau_s
/// for x_from < a < x_to, with K the heat kernel of diffusion constant D.
inline EuclideanPdxResult euclidean_pdx_check(double x_from, double wall, double x_to, double tau, double diffusion,
                                              const AdaptiveSpec& quad = {}) {
  if (!(x_from < wall && wall < x_to)) throw DomainError("Euclidean check needs x_from < a < x_to");
  if (!(tau > 0.0)) throw DomainError("Euclidean check needs tau > 0");
  EuclideanPdxResult out;
  out.lhs = heat_kernel(x_to - x_from, tau, diffusion);
  auto integrand = [&](double ts) {
    if (ts <= 0.0 || ts >= tau) return 0.0;
    return brownian_first_passage_density(x_from, wall, ts, diffusion) * heat_kernel(x_to - wall, tau - ts, diffusion);
  };
  const AdaptiveResult r = adaptive_simpson(integrand, 0.0, tau, quad.rel_tol, 1e-300, quad.max_intervals);
  out.rhs = r.value;
  out.intervals = r.intervals;
  out.residual = out.lhs > 0.0 ? std::abs(out.lhs - out.rhs) / out.lhs : std::abs(out.rhs);
  return out;
}

}  // namespace pdx::oracle
