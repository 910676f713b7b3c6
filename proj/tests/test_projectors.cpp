#include <catch_amalgamated.hpp>

#include <random>

#include "pdx/projectors.hpp"
#include "pdx/restricted.hpp"

using namespace pdx;

namespace {

double spectrum_distance_to_01(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    const double e = es.eigenvalues()[k];
    worst = std::max(worst, std::min(std::abs(e), std::abs(e - 1.0)));
  }
  return worst;
}

}  // namespace

TEST_CASE("full-line position region is the identity", "[position]") {
  const GridModel g(32, -4.0, 4.0);
  const Projector p = position_projector(g, RegionSpec::position(g.x_min, Side::above, Membership::C));
  REQUIRE(p.matrix == Mat::Identity(32, 32));
  REQUIRE(p.rank == 32);
}

TEST_CASE("completeness and exclusivity are exact", "[position]") {
  const GridModel g(40, -4.0, 4.0);
  for (auto side : {Side::above, Side::below}) {
    for (auto node : {Membership::C, Membership::C_bar}) {
      const Projector p = position_projector(g, RegionSpec::position(0.3, side, node));
      const Projector q = complement(p);
      REQUIRE(Mat(p.matrix + q.matrix) == Mat::Identity(40, 40));
      REQUIRE(Mat(p.matrix * q.matrix) == Mat::Zero(40, 40));
      REQUIRE(p.idempotence_defect() == 0.0);
      REQUIRE(p.rank + q.rank == 40);
    }
  }
}

TEST_CASE("boundary node membership and rank", "[position]") {
  const GridModel g(11, 0.0, 10.0);
  const auto in_c = position_projector(g, RegionSpec::position(4.0, Side::above, Membership::C));
  REQUIRE(in_c.rank == 7);
  REQUIRE(in_c.matrix(4, 4) == cplx(1.0));
  const auto in_cbar = position_projector(g, RegionSpec::position(4.0, Side::above, Membership::C_bar));
  REQUIRE(in_cbar.rank == 6);
  REQUIRE(in_cbar.matrix(4, 4) == cplx(0.0));
  const auto below = position_projector(g, RegionSpec::position(4.0, Side::below, Membership::C));
  REQUIRE(below.rank == 5);
  REQUIRE(below.matrix(0, 0) == cplx(1.0));
}

TEST_CASE("surface snapping records the offset", "[position]") {
  const GridModel g(11, 0.0, 10.0);
  const auto p = position_projector(g, RegionSpec::position(4.3));
  REQUIRE(p.surface);
  REQUIRE(p.surface->boundary_index == 4);
  REQUIRE_THAT(p.surface->snap_offset(), Catch::Matchers::WithinAbs(0.3, 1e-12));
  REQUIRE(p.surface->snap_offset() <= 0.5 * g.dx());
  REQUIRE_THROWS_AS(position_projector(g, RegionSpec::position(10.5)), DomainError);
  REQUIRE_THROWS_AS(position_projector(g, RegionSpec::position(-0.1)), DomainError);
  REQUIRE_THROWS_AS(position_projector(g, RegionSpec::momentum()), DomainError);
}

TEST_CASE("momentum projector", "[momentum]") {
  for (std::size_t n : {31u, 64u, 128u}) {
    const GridModel g(n, -5.0, 5.0, Boundary::periodic);
    const Projector p = momentum_projector(g);
    REQUIRE(p.rank == static_cast<Eigen::Index>((n - 1) / 2));
    REQUIRE(p.idempotence_defect() <= 1e-11);
    REQUIRE(max_abs(p.matrix - p.matrix.adjoint()) <= 1e-14);
    REQUIRE(spectrum_distance_to_01(p.matrix) <= 1e-10);
    const Projector q = complement(p);
    const auto ni = static_cast<Eigen::Index>(n);
    REQUIRE(max_abs(p.matrix * q.matrix) <= 1e-11);
    REQUIRE(max_abs(p.matrix + q.matrix - Mat::Identity(ni, ni)) <= 1e-11);

    const Vec k1 = plane_wave(ni, 1);
    REQUIRE(max_abs(p.matrix * k1 - k1) <= 1e-12);
    const Vec k0 = plane_wave(ni, 0);
    REQUIRE(max_abs(p.matrix * k0) <= 1e-12);
    const Vec km = plane_wave(ni, -1);
    REQUIRE(max_abs(p.matrix * km) <= 1e-12);
  }
  REQUIRE(mode_momentum(GridModel(64, 0.0, 63.0, Boundary::periodic), 1, 1.0) ==
          Catch::Approx(2.0 * std::numbers::pi / 64.0));
}

TEST_CASE("momentum projector needs a periodic grid", "[momentum]") {
  REQUIRE_THROWS_AS(momentum_projector(GridModel(64, -5.0, 5.0)), PreconditionError);
}

TEST_CASE("heisenberg projector", "[heisenberg]") {
  const System sys(Model{GridModel(96, -6.0, 6.0), PhysicalParams{1.0, 1.0, 1.0}, PotentialSpec::harmonic(1.0)});
  const Projector p = position_projector(sys.grid(), RegionSpec::position(0.5));
  REQUIRE(heisenberg_projector(p, sys.propagator(0.0)).matrix() == p.matrix);

  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 4; ++trial) {
    const Mat pt = heisenberg_projector(p, sys.propagator(u(rng))).matrix();
    REQUIRE(max_abs(pt * pt - pt) <= 1e-10);
    REQUIRE(std::abs(pt.trace() - static_cast<double>(p.rank)) <= 1e-9);
    REQUIRE(spectrum_distance_to_01(pt) <= 1e-9);
  }

  const GridModel periodic(64, -6.0, 6.0, Boundary::periodic);
  const System ring(Model{periodic, PhysicalParams{}, PotentialSpec::free()});
  const Projector mp = momentum_projector(periodic);
  const Mat mt = heisenberg_projector(mp, ring.propagator(0.7)).matrix();
  // free evolution commutes with momentum
  REQUIRE(max_abs(mt - mp.matrix) <= 1e-11);

  REQUIRE_THROWS_AS(heisenberg_projector(p, ring.propagator(0.1)), DimensionError);
}
