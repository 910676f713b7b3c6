#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "pdx/errors.hpp"

namespace pdx {

enum class QuadratureRule { trapezoid, simpson };

/// Composite rule over a closed interval with equally spaced nodes.
struct QuadratureSpec {
  QuadratureRule rule = QuadratureRule::simpson;
  std::size_t n_nodes = 129;

  void validate() const {
    if (n_nodes < 3) throw DomainError("quadrature needs at least 3 nodes");
    if (rule == QuadratureRule::simpson && n_nodes % 2 == 0) {
      throw DomainError("composite Simpson needs an odd node count, got " + std::to_string(n_nodes));
    }
  }

  /// Same rule with the node spacing halved.
  [[nodiscard]] QuadratureSpec refined() const { return {rule, 2 * n_nodes - 1}; }

  [[nodiscard]] std::vector<double> nodes(double a, double b) const {
    validate();
    std::vector<double> t(n_nodes);
    const double h = (b - a) / static_cast<double>(n_nodes - 1);
    for (std::size_t k = 0; k < n_nodes; ++k) t[k] = a + static_cast<double>(k) * h;
    t.back() = b;
    return t;
  }

  [[nodiscard]] std::vector<double> weights(double a, double b) const {
    validate();
    return composite_weights(rule, n_nodes, (b - a) / static_cast<double>(n_nodes - 1));
  }

  /// Weights of the rule on `count` nodes with spacing h.
  static std::vector<double> composite_weights(QuadratureRule rule, std::size_t count, double h) {
    std::vector<double> w(count, 0.0);
    if (count < 2) return w;
    if (rule == QuadratureRule::trapezoid) {
      for (std::size_t k = 0; k < count; ++k) w[k] = h;
      w.front() = w.back() = 0.5 * h;
      return w;
    }
    if (count % 2 == 0) throw DomainError("composite Simpson needs an odd node count");
    for (std::size_t k = 0; k < count; ++k) w[k] = (k % 2 == 1 ? 4.0 : 2.0) * h / 3.0;
    w.front() = w.back() = h / 3.0;
    return w;
  }
};

struct AdaptiveResult {
  double value = 0.0;
  std::size_t intervals = 0;
};

/// Composite Simpson with interval doubling until successive estimates agree to
/// rel_tol (relative to the estimate, with abs_floor as an absolute floor).
template <class Fn>
AdaptiveResult adaptive_simpson(Fn&& f, double a, double b, double rel_tol = 1e-8, double abs_floor = 1e-300,
                                std::size_t max_intervals = std::size_t{1} << 16) {
  if (!(b > a)) return {0.0, 0};
  std::size_t m = 16;
  const double fa = f(a);
  const double fb = f(b);
  // running sums of interior evaluations: odd nodes and even nodes of the current mesh
  double even_sum = 0.0;
  double odd_sum = 0.0;
  {
    const double h = (b - a) / static_cast<double>(m);
    for (std::size_t k = 1; k < m; ++k) {
      const double v = f(a + static_cast<double>(k) * h);
      (k % 2 == 1 ? odd_sum : even_sum) += v;
    }
  }
  auto estimate = [&](double h) { return h / 3.0 * (fa + fb + 4.0 * odd_sum + 2.0 * even_sum); };
  double previous = estimate((b - a) / static_cast<double>(m));
  while (m < max_intervals) {
    m *= 2;
    const double h = (b - a) / static_cast<double>(m);
    even_sum += odd_sum;
    odd_sum = 0.0;
    for (std::size_t k = 1; k < m; k += 2) odd_sum += f(a + static_cast<double>(k) * h);
    const double current = estimate(h);
    if (!std::isfinite(current)) throw NumericError("adaptive Simpson hit a non-finite integrand value");
    if (std::abs(current - previous) <= std::max(rel_tol * std::abs(current), abs_floor)) {
      return {current, m};
    }
    previous = current;
  }
  std::ostringstream os;
  os << "adaptive Simpson did not reach relative tolerance " << rel_tol << " with " << m + 1 << " nodes";
  throw NumericError(os.str());
}

}  // namespace pdx
