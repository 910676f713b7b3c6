#include <catch_amalgamated.hpp>

#include "pdx.hpp"

using namespace pdx;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const Packet kSource{-1.5, 0.35};
const Packet kTarget{1.5, 0.35};

cplx position_route_element(const PhysicalParams& pp, std::size_t n, double half, double t) {
  const GridModel xg(n, -half, half, Boundary::periodic);
  const System xs(Model{xg, pp, PotentialSpec::harmonic(pp.omega)});
  const Vec xi = momentum_packet_in_position(kSource, pp.hbar).sample(xg, pp.hbar);
  const Vec xf = momentum_packet_in_position(kTarget, pp.hbar).sample(xg, pp.hbar);
  return inner(xg, xf, xs.evolve(xi, t));
}

}  // namespace

TEST_CASE("dual map constants", "[dual]") {
  const GridModel pg(64, -5.0, 5.0);
  const auto unit = dual_map(PhysicalParams{1.0, 1.0, 1.0}, pg);
  REQUIRE(unit.mapped_mass == 1.0);
  REQUIRE(unit.mapped_omega == 1.0);
  const auto doubled = dual_map(PhysicalParams{1.0, 1.0, 2.0}, pg);
  REQUIRE_THAT(doubled.mapped_mass, WithinRel(0.25, 1e-15));
  for (double m : {0.5, 1.0, 2.0}) {
    for (double w : {0.5, 1.0, 2.0}) {
      REQUIRE_THAT(dual_map(PhysicalParams{m, 1.0, w}, pg).mapped_omega, WithinRel(w, 1e-14));
    }
  }
  REQUIRE_THROWS_AS(dual_map(PhysicalParams{1.0, 1.0, 0.0}, pg), UnsupportedError);
  REQUIRE_THAT(natural_momentum(PhysicalParams{2.0, 1.0, 2.0}), WithinRel(2.0, 1e-15));
}

TEST_CASE("dual spectrum is the oscillator spectrum", "[dual]") {
  for (double w : {1.0, 2.0}) {
    const PhysicalParams pp{1.0, 1.0, w};
    const double s = natural_momentum(pp);
    const System dual(dual_map(pp, GridModel(1024, -10.0 * s, 10.0 * s)).model());
    for (int k = 0; k < 5; ++k) REQUIRE_THAT(dual.spectrum().eigenvalues[k], WithinAbs(w * (k + 0.5), 1e-3 * w));
  }
}

TEST_CASE("momentum restricted propagator", "[restricted]") {
  const auto dual = dual_map(PhysicalParams{1.0, 1.0, 1.0}, GridModel(129, -8.0, 8.0));
  const System sys(dual.model());
  const auto j0 = static_cast<Eigen::Index>(sys.grid().nearest_node(0.0));
  REQUIRE(sys.grid().x(static_cast<std::size_t>(j0)) == 0.0);

  const auto g = momentum_restricted_propagator(sys, 0.6);
  REQUIRE(g.region.basis == Basis::momentum);
  REQUIRE(g.matrix.row(j0).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(g.matrix.col(j0).cwiseAbs().maxCoeff() == 0.0);

  const auto g0 = momentum_restricted_propagator(sys, 0.0);
  for (Eigen::Index j = 0; j < 129; ++j) {
    REQUIRE(std::abs(g0.matrix(j, j) - (j < j0 ? cplx(1.0) : cplx(0.0))) <= 1e-13);
  }

  const Mat a = momentum_restricted_propagator(sys, 0.25).matrix;
  const Mat b = momentum_restricted_propagator(sys, 0.35).matrix;
  REQUIRE(max_abs(momentum_restricted_propagator(sys, 0.6).matrix - b * a) <= 1e-11);

  const Mat block = g.matrix.topLeftCorner(j0, j0);
  REQUIRE(max_abs(block.adjoint() * block - Mat::Identity(j0, j0)) <= 1e-11);
  REQUIRE(momentum_restricted_propagator(dual, 0.6).matrix == g.matrix);
}

TEST_CASE("momentum kernel is unitary", "[dual]") {
  const System sys(dual_map(PhysicalParams{2.0, 1.0, 0.5}, GridModel(128, -8.0, 8.0)).model());
  REQUIRE(sys.propagator(1.3).unitarity_defect() <= 1e-11);
}

TEST_CASE("momentum expansion refines", "[pdx]") {
  const PhysicalParams pp{1.0, 1.0, 1.0};
  const auto base = momentum_pdx_residual(dual_map(pp, GridModel(512, -20.0, 20.0)), kSource, kTarget,
                                          PdxTimes{0.0, 1.0}, QuadratureSpec{});
  const auto fine = momentum_pdx_residual(dual_map(pp, GridModel(1024, -20.0, 20.0)), kSource, kTarget,
                                          PdxTimes{0.0, 1.0}, QuadratureSpec{}.refined());
  REQUIRE(base.residual <= 5e-2);
  REQUIRE(fine.residual <= 0.6 * base.residual);
  REQUIRE(base.resolved_sign == -1);
  REQUIRE(fine.resolved_sign == -1);
  REQUIRE(base.residual_other_sign > 1.0);
  REQUIRE(base.initial_leak <= kLeakTolerance);
  REQUIRE(base.final_leak <= kLeakTolerance);
}

TEST_CASE("momentum expansion with no elapsed time", "[pdx]") {
  const auto dual = dual_map(PhysicalParams{1.0, 1.0, 1.0}, GridModel(512, -20.0, 20.0));
  const auto r = momentum_pdx_residual(dual, Packet{-1.5, 0.25}, Packet{1.5, 0.25}, PdxTimes{0.3, 0.3}, QuadratureSpec{});
  REQUIRE(std::abs(r.lhs) <= 1e-8);
  REQUIRE(std::abs(r.rhs) <= 1e-8);
}

TEST_CASE("momentum expansion preconditions", "[pdx]") {
  const auto dual = dual_map(PhysicalParams{1.0, 1.0, 1.0}, GridModel(256, -20.0, 20.0));
  const PdxTimes times{0.0, 1.0};
  REQUIRE_THROWS_AS(momentum_pdx_residual(dual, kTarget, kSource, times, {}), PreconditionError);
  REQUIRE_THROWS_AS(momentum_pdx_residual(dual, Packet{-0.3, 0.35}, kTarget, times, {}), PreconditionError);
  REQUIRE_THROWS_AS(momentum_pdx_residual(dual, Packet{-1.5, 0.1}, kTarget, times, {}), PreconditionError);
}

TEST_CASE("resolved sign is stable across models", "[pdx][sign]") {
  for (double m : {0.5, 2.0}) {
    for (double w : {0.5, 2.0}) {
      const PhysicalParams pp{m, 1.0, w};
      const double s = natural_momentum(pp);
      const auto r = momentum_pdx_residual(dual_map(pp, GridModel(512, -20.0 * s, 20.0 * s)),
                                           Packet{-1.5 * s, 0.35 * s}, Packet{1.5 * s, 0.35 * s},
                                           PdxTimes{0.0, 1.0 / w}, QuadratureSpec{});
      INFO("m = " << m << ", omega = " << w);
      REQUIRE(r.resolved_sign == -1);
      REQUIRE(r.residual <= 5e-2);
    }
  }
}

TEST_CASE("duality against the position representation", "[dual][oracle]") {
  // DFT route: the same oscillator on a periodic position grid with the
  // packets written in x. The gap must shrink at second order in the spacing.
  const PhysicalParams pp{1.0, 1.0, 1.0};
  double previous = 1e300;
  for (std::size_t n : {256u, 512u, 1024u}) {
    const System dual(dual_map(pp, GridModel(n, -20.0, 20.0)).model());
    const GridModel& pg = dual.grid();
    const cplx via_dual = inner(pg, kTarget.sample(pg), dual.evolve(kSource.sample(pg), 1.0));
    const cplx via_position = position_route_element(pp, n, 20.0, 1.0);
    const double gap = std::abs(via_dual - via_position) / std::abs(via_position);
    INFO("n = " << n << " gap " << gap);
    REQUIRE(gap <= 0.3 * previous);
    previous = gap;
  }
  REQUIRE(previous <= 1e-2);
}

TEST_CASE("momentum expansion agrees with the projector route", "[pdx][generalized]") {
  const PhysicalParams pp{1.0, 1.0, 1.0};
  const GridModel xg(512, -20.0, 20.0, Boundary::periodic);
  const System xs(Model{xg, pp, PotentialSpec::harmonic(1.0)});
  const Vec xi = momentum_packet_in_position(kSource, 1.0).sample(xg);
  const Vec xf = momentum_packet_in_position(kTarget, 1.0).sample(xg);
  const auto op = generalized_pdx(xs, momentum_projector(xg), PdxTimes{0.0, 1.0}, QuadratureSpec{}, xi);
  const double op_residual = op.element_residual(xg, xf);
  REQUIRE(op_residual <= 1e-6);

  const auto dual = momentum_pdx_residual(dual_map(pp, GridModel(512, -20.0, 20.0)), kSource, kTarget,
                                          PdxTimes{0.0, 1.0}, QuadratureSpec{});
  const cplx via_position = inner(xg, xf, op.lhs.col(0));
  const double duality_gap = std::abs(dual.lhs - via_position) / std::abs(via_position);
  const cplx op_flux = inner(xg, xf, op.flux_term.col(0));
  REQUIRE(std::abs(op_flux - dual.rhs) / std::abs(dual.lhs) <= dual.residual + duality_gap + op_residual);
}
