#include <catch_amalgamated.hpp>

#include "pdx.hpp"

using namespace pdx;

namespace {

System free_line(std::size_t n, double half) {
  return System(Model{GridModel(n, -half, half), PhysicalParams{}, PotentialSpec::free()});
}

System oscillator(std::size_t n, double half) {
  return System(Model{GridModel(n, -half, half), PhysicalParams{1.0, 1.0, 1.0}, PotentialSpec::harmonic(1.0)});
}

Vec ground_state(const System& sys) {
  Vec v = sys.spectrum().eigenvectors.col(0);
  return v / std::sqrt(norm_sq(sys.grid(), v));
}

// Packet next to the surface heading into C: free line of 512 points on [-20, 20],
// surface at 0, T = 2, Simpson 129. Frozen from a direct run.
constexpr double kAtSurfaceDeviation = 1.5596306;

}  // namespace

TEST_CASE("window additivity and linearity", "[amplitude]") {
  const System sys = free_line(512, 20.0);
  const RegionSpec region = RegionSpec::position(0.0);
  const Vec psi = Packet{-2.0, 0.4, 2.0}.sample(sys.grid());
  const PdxTimes times{0.0, 2.0};
  const CrossingIntegrator ci(sys, region, psi, times, QuadratureSpec{});
  const auto a12 = ci.amplitude({0.25, 0.75});
  const auto a23 = ci.amplitude({0.75, 1.5});
  const auto a13 = ci.amplitude({0.25, 1.5});
  REQUIRE(max_abs(a12.values + a23.values - a13.values) <= 1e-10);
  REQUIRE(a12.t2_used == a23.t1_used);
  REQUIRE(std::abs(a12.t1_offset) <= 2.0 / 128.0);

  const cplx c{0.3, -1.7};
  const auto scaled = first_crossing_amplitude(sys, region, Vec(c * psi), {0.25, 1.5}, times, QuadratureSpec{});
  REQUIRE(max_abs(scaled.values - c * a13.values) <= 1e-13 * std::abs(c) * a13.values.cwiseAbs().maxCoeff());
  REQUIRE(a13.values.allFinite());
}

TEST_CASE("window and support checks", "[amplitude]") {
  const System sys = free_line(256, 20.0);
  const RegionSpec region = RegionSpec::position(0.0);
  const Vec psi = Packet{-3.0, 0.5}.sample(sys.grid());
  const PdxTimes times{0.0, 1.0};
  REQUIRE_THROWS_AS(first_crossing_amplitude(sys, region, psi, {0.0, 0.5}, times, {}), DomainError);
  REQUIRE_THROWS_AS(first_crossing_amplitude(sys, region, psi, {0.5, 1.0}, times, {}), DomainError);
  REQUIRE_THROWS_AS(first_crossing_amplitude(sys, region, psi, {0.6, 0.4}, times, {}), DomainError);
  const Vec across = Packet{0.5, 0.5}.sample(sys.grid());
  REQUIRE_THROWS_AS(first_crossing_amplitude(sys, region, across, {0.2, 0.4}, times, {}), PreconditionError);
}

TEST_CASE("far-from-surface eigenstate", "[amplitude][sum-rule]") {
  const System sys = oscillator(512, 20.0);
  const RegionSpec region = RegionSpec::position(5.0);
  const Vec psi = ground_state(sys);
  const PdxTimes times{0.0, 2.0};
  const auto a = first_crossing_amplitude(sys, region, psi, {0.5, 1.0}, times, QuadratureSpec{});
  REQUIRE(std::sqrt(candidate_probability(a, sys.grid())) <= 1e-4);
  REQUIRE(never_cross_probability(sys, region, psi, times) >= 0.999);
  const auto report = sum_rule_diagnostic(sys, region, psi, times, QuadratureSpec{});
  REQUIRE(std::abs(report.deviation) <= 1e-3);
  REQUIRE(report.p_cross >= 0.0);
  REQUIRE(report.grid_points == 512);
  REQUIRE(report.quadrature_nodes == 129);
}

TEST_CASE("candidate probability", "[probability]") {
  const System sys = free_line(512, 20.0);
  const RegionSpec region = RegionSpec::position(0.0);
  const Vec psi = Packet{-2.0, 0.4, 2.0}.sample(sys.grid());
  const PdxTimes times{0.0, 2.0};
  const CrossingIntegrator ci(sys, region, psi, times, QuadratureSpec{});

  CrossingAmplitude zero;
  zero.values = Vec::Zero(512);
  REQUIRE(candidate_probability(zero, sys.grid()) == 0.0);

  // classical arrival at t = 1
  const double at_arrival = candidate_probability(ci.amplitude({0.7, 1.3}), sys.grid());
  const double before = candidate_probability(ci.amplitude({0.05, 0.4}), sys.grid());
  REQUIRE(at_arrival > 0.0);
  REQUIRE(at_arrival < 1.5);
  REQUIRE(at_arrival > before);

  const CrossingIntegrator rotated(sys, region, Vec(std::polar(1.0, 0.9) * psi), times, QuadratureSpec{});
  REQUIRE_THAT(candidate_probability(rotated.amplitude({0.7, 1.3}), sys.grid()),
               Catch::Matchers::WithinRel(at_arrival, 1e-12));
}

TEST_CASE("never-cross probability", "[probability]") {
  const System sys = free_line(256, 20.0);
  const GridModel& g = sys.grid();
  const Vec psi = Packet{-3.0, 0.5, 2.0}.sample(g);
  const RegionSpec whole = RegionSpec::position(g.x_max, Side::above, Membership::C_bar);
  REQUIRE_THAT(never_cross_probability(sys, whole, psi, {0.0, 1.0}), Catch::Matchers::WithinAbs(1.0, 1e-11));
  REQUIRE_THAT(never_cross_probability(sys, RegionSpec::position(0.0), psi, {0.4, 0.4}),
               Catch::Matchers::WithinAbs(1.0, 1e-12));
  REQUIRE(never_cross_probability(sys, RegionSpec::position(0.0), psi, {0.0, 1.0}) <= 1.0 + 1e-10);
}

TEST_CASE("sum-rule deviation next to the surface", "[sum-rule]") {
  const System sys = free_line(512, 20.0);
  const RegionSpec region = RegionSpec::position(0.0);
  const Vec psi = Packet{-2.0, 0.4, 2.0}.sample(sys.grid());
  const auto report = sum_rule_diagnostic(sys, region, psi, {0.0, 2.0}, QuadratureSpec{});
  REQUIRE(std::abs(report.deviation) > 1e-3);
  REQUIRE_THAT(report.deviation, Catch::Matchers::WithinRel(kAtSurfaceDeviation, 1e-6));
  REQUIRE(report.p_never >= 0.0);
  REQUIRE(report.p_never <= 1.0 + 1e-10);

  const auto rotated = sum_rule_diagnostic(sys, region, Vec(cplx(0.0, 1.0) * psi), {0.0, 2.0}, QuadratureSpec{});
  REQUIRE_THAT(rotated.deviation, Catch::Matchers::WithinRel(report.deviation, 1e-12));
}

TEST_CASE("amplitude matches crossing classes", "[amplitude][consistency]") {
  const System sys = free_line(128, 10.0);
  const GridModel& g = sys.grid();
  const RegionSpec region = RegionSpec::position(0.0);
  const Vec psi = Packet{-2.7, 0.6, 1.0}.sample(g);
  const Vec f = Packet{1.5, 0.6, 1.0}.sample(g);
  const double T = 3.0;
  const CrossingIntegrator ci(sys, region, psi, {0.0, T}, QuadratureSpec{QuadratureRule::simpson, 513});
  const cplx route = inner(g, f, ci.amplitude({1.0, 2.0}).values);

  const Projector p = position_projector(g, region);
  double previous = 1e300;
  for (int n : {64, 256}) {
    const SlicingSpec s{0.0, T, n};
    const auto terms = resolution_of_identity(p, sys.propagator(s.delta_t()), s);
    const auto el = crossing_matrix_element(terms, g, f, psi);
    const auto k1 = static_cast<std::size_t>(std::lround(1.0 / s.delta_t()));
    const auto k2 = static_cast<std::size_t>(std::lround(2.0 / s.delta_t()));
    const double gap = std::abs(el.crossing_sum(k1, k2) - route) / std::abs(route);
    REQUIRE(gap < previous);
    previous = gap;
  }
  REQUIRE(previous <= 0.1);
}

TEST_CASE("crossing amplitudes are thread-count independent", "[amplitude][determinism]") {
  const System sys = free_line(256, 20.0);
  const Vec psi = Packet{-3.0, 0.5, 2.0}.sample(sys.grid());
  const CrossingIntegrator ci(sys, RegionSpec::position(0.0), psi, {0.0, 2.0}, QuadratureSpec{});
  REQUIRE(ci.full_amplitude(Exec{1}) == ci.full_amplitude(Exec{3}));
}
