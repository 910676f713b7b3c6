#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "pdx/errors.hpp"
#include "pdx/grid.hpp"
#include "pdx/hilbert.hpp"
#include "pdx/parallel.hpp"
#include "pdx/projectors.hpp"

namespace pdx {

struct ZenoConfig {
  double total_time = 0.0;
  int slices = 1;

  void validate() const {
    if (slices < 1) throw DomainError("Zeno product needs at least one slice");
    if (!(total_time > 0.0) || !std::isfinite(total_time)) throw DomainError("Zeno total time must be positive");
  }
  [[nodiscard]] double delta_t() const { return total_time / slices; }
};

enum class RestrictionMethod { zeno, dirichlet, subspace };

/// Evolution confined to C-bar. Not unitary on the full space.
struct RestrictedPropagator {
  Mat matrix;
  RestrictionMethod method = RestrictionMethod::dirichlet;
  int slices = 0;  // Zeno slice count; 0 for exact restrictions
  RegionSpec region;
  double t_span = 0.0;
};

/// Projector onto C-bar built from a projector onto C.
inline Projector complement(const Projector& p) {
  Projector out;
  out.matrix = p.complement();
  out.region = p.region;
  out.region.side_of_c = p.region.side_of_c == Side::above ? Side::below : Side::above;
  if (p.region.basis == Basis::position) {
    out.region.boundary_node = p.region.boundary_node == Membership::C ? Membership::C_bar : Membership::C;
  }
  out.rank = p.dim() - p.rank;
  out.surface = p.surface;
  if (out.surface) {
    out.surface->c_above = !out.surface->c_above;
    out.surface->boundary_in_c = !out.surface->boundary_in_c;
  }
  return out;
}

/// [U(dt) P_bar]^K, evaluated by repeated squaring.
inline RestrictedPropagator zeno_product(const PropagatorMatrix& u_step, const Projector& p_bar, int slices) {
  if (slices <= 0) throw DomainError("Zeno product needs K >= 1, got " + std::to_string(slices));
  if (u_step.entries.rows() != p_bar.dim()) throw DimensionError("propagator and projector orders differ");
  Mat base = u_step.entries * p_bar.matrix;
  Mat acc;
  bool have = false;
  for (int k = slices; k > 0; k >>= 1) {
    if (k & 1) {
      acc = have ? Mat(acc * base) : base;
      have = true;
    }
    if (k > 1) base = (base * base).eval();
  }
  RestrictedPropagator out;
  out.matrix = std::move(acc);
  out.method = RestrictionMethod::zeno;
  out.slices = slices;
  out.region = p_bar.region;
  out.t_span = u_step.span() * slices;
  return out;
}

/// exp(-i H_r t / hbar) for the compression H_r of H onto a subspace, embedded in
/// the full space. Position restrictions use a node subset (Dirichlet walls);
/// other regions use an orthonormal basis of the range of P_bar.
class RestrictedEvolver {
 public:
  /// Dirichlet restriction to the C-bar interior nodes of a position region.
  RestrictedEvolver(const HermitianMatrix& h, const GridModel& grid, const RegionSpec& region, double hbar)
      : n_(h.order()), hbar_(hbar) {
    const SurfaceGeometry geom = resolve_surface(grid, region);
    nodes_ = geom.c_bar_interior_nodes();
    geometry_ = geom;
    if (nodes_.empty()) return;
    const auto r = static_cast<Eigen::Index>(nodes_.size());
    Mat sub(r, r);
    for (Eigen::Index a = 0; a < r; ++a) {
      for (Eigen::Index b = 0; b < r; ++b) sub(a, b) = h.matrix()(nodes_[a], nodes_[b]);
    }
    sub_ = spectral_decompose(HermitianMatrix(std::move(sub)));
  }

  /// Compression onto range(P_bar) for an arbitrary projector onto C.
  RestrictedEvolver(const HermitianMatrix& h, const Projector& p_c, double hbar) : n_(h.order()), hbar_(hbar) {
    if (p_c.dim() != n_) throw DimensionError("projector and Hamiltonian orders differ");
    Eigen::SelfAdjointEigenSolver<Mat> es(p_c.complement());
    if (es.info() != Eigen::Success) throw NumericError("could not diagonalize the complement projector");
    std::vector<Eigen::Index> keep;
    for (Eigen::Index k = 0; k < n_; ++k) {
      if (es.eigenvalues()[k] > 0.5) keep.push_back(k);
    }
    basis_.resize(n_, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) basis_.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(keep[k]);
    if (!keep.empty()) sub_ = spectral_decompose(HermitianMatrix(basis_.adjoint() * h.matrix() * basis_));
  }

  [[nodiscard]] Eigen::Index dim() const { return n_; }
  [[nodiscard]] Eigen::Index rank() const { return sub_.order(); }
  [[nodiscard]] bool is_dirichlet() const { return geometry_.has_value(); }
  [[nodiscard]] bool empty() const { return sub_.order() == 0; }
  [[nodiscard]] const std::optional<SurfaceGeometry>& geometry() const { return geometry_; }
  [[nodiscard]] const SpectralDecomposition& sub_spectrum() const { return sub_; }

  /// Coordinates of a full-space vector in the restricted eigenbasis.
  [[nodiscard]] Vec coefficients(const Vec& v) const { return sub_.eigenvectors.adjoint() * compress(v); }

  [[nodiscard]] Vec evolve(const Vec& v, double t) const {
    if (empty()) return Vec::Zero(n_);
    return expand(sub_.eigenvectors * phases(sub_.eigenvalues, hbar_, t).cwiseProduct(coefficients(v)));
  }

  /// exp(-H_r tau / hbar) v, the imaginary-time restricted evolution.
  [[nodiscard]] Vec evolve_euclidean(const Vec& v, double tau) const {
    if (empty()) return Vec::Zero(n_);
    Vec decay(sub_.order());
    for (Eigen::Index k = 0; k < sub_.order(); ++k) decay[k] = std::exp(-sub_.eigenvalues[k] * tau / hbar_);
    return expand(sub_.eigenvectors * decay.cwiseProduct(coefficients(v)));
  }

  /// Entry j (full index) of G(t) v, given coeffs = coefficients(v). Dirichlet only.
  [[nodiscard]] cplx evolved_entry(const Vec& coeffs, double t, Eigen::Index j) const {
    const Eigen::Index a = local_index(j);
    if (a < 0 || empty()) return {};
    return sub_.eigenvectors.row(a).transpose().cwiseProduct(phases(sub_.eigenvalues, hbar_, t).cwiseProduct(coeffs)).sum();
  }

  /// Full matrix of the embedded restricted propagator.
  [[nodiscard]] Mat matrix(double t) const {
    if (empty()) return Mat::Zero(n_, n_);
    const Mat local = sub_.eigenvectors * phases(sub_.eigenvalues, hbar_, t).asDiagonal() * sub_.eigenvectors.adjoint();
    if (is_dirichlet()) {
      Mat out = Mat::Zero(n_, n_);
      const auto r = static_cast<Eigen::Index>(nodes_.size());
      for (Eigen::Index a = 0; a < r; ++a) {
        for (Eigen::Index b = 0; b < r; ++b) out(nodes_[a], nodes_[b]) = local(a, b);
      }
      return out;
    }
    return basis_ * local * basis_.adjoint();
  }

 private:
  [[nodiscard]] Vec compress(const Vec& v) const {
    if (v.size() != n_) throw DimensionError("state and restricted propagator orders differ");
    if (!is_dirichlet()) return basis_.adjoint() * v;
    Vec out(static_cast<Eigen::Index>(nodes_.size()));
    for (std::size_t a = 0; a < nodes_.size(); ++a) out[static_cast<Eigen::Index>(a)] = v[nodes_[a]];
    return out;
  }

  [[nodiscard]] Vec expand(const Vec& local) const {
    if (!is_dirichlet()) return basis_ * local;
    Vec out = Vec::Zero(n_);
    for (std::size_t a = 0; a < nodes_.size(); ++a) out[nodes_[a]] = local[static_cast<Eigen::Index>(a)];
    return out;
  }

  [[nodiscard]] Eigen::Index local_index(Eigen::Index j) const {
    if (!is_dirichlet()) throw UnsupportedError("entry access needs a Dirichlet restriction");
    if (nodes_.empty()) return -1;
    // interior nodes are one contiguous run
    const Eigen::Index first = nodes_.front();
    const Eigen::Index a = j - first;
    if (a < 0 || a >= static_cast<Eigen::Index>(nodes_.size())) return -1;
    return a;
  }

  Eigen::Index n_ = 0;
  double hbar_ = 1.0;
  std::vector<Eigen::Index> nodes_;
  Mat basis_;
  SpectralDecomposition sub_;
  std::optional<SurfaceGeometry> geometry_;
};

/// Dirichlet-restricted propagator: H on the C-bar interior nodes, exponentiated,
/// embedded with zeros on C and on the surface node.
inline RestrictedPropagator dirichlet_restricted(const HermitianMatrix& h, const GridModel& grid,
                                                 const RegionSpec& region, const PhysicalParams& params, double t) {
  if (region.basis != Basis::position) {
    throw UnsupportedError("Dirichlet restriction is defined for position regions; use the momentum duality map");
  }
  const RestrictedEvolver ev(h, grid, region, params.hbar);
  if (ev.empty()) throw DomainError("restricted region has no interior nodes");
  RestrictedPropagator out;
  out.matrix = ev.matrix(t);
  out.method = RestrictionMethod::dirichlet;
  out.region = region;
  out.t_span = t;
  return out;
}

struct ZenoRow {
  int slices = 0;
  double delta_t = 0.0;
  double frobenius_error = 0.0;
  double empirical_order = std::numeric_limits<double>::quiet_NaN();
};

/// Frobenius distance of [U(T/K) P_bar]^K to the Dirichlet propagator for each K.
/// The empirical order compares consecutive rows: log(e_prev / e) / log(K / K_prev).
inline std::vector<ZenoRow> zeno_convergence_study(const System& sys, const RegionSpec& region, double total_time,
                                                   const std::vector<int>& slice_list, const Exec& exec = {}) {
  if (slice_list.size() < 3) throw DomainError("convergence study needs at least three slice counts");
  for (std::size_t i = 1; i < slice_list.size(); ++i) {
    if (slice_list[i] <= slice_list[i - 1]) throw DomainError("slice counts must be strictly ascending");
  }
  ZenoConfig{total_time, slice_list.front()}.validate();
  const Projector p_bar = complement(position_projector(sys.grid(), region));
  const Mat reference = dirichlet_restricted(sys.hamiltonian(), sys.grid(), region, sys.params(), total_time).matrix;

  auto rows = parallel_map<ZenoRow>(slice_list.size(), exec, [&](std::size_t i) {
    const ZenoConfig cfg{total_time, slice_list[i]};
    cfg.validate();
    const RestrictedPropagator z = zeno_product(sys.propagator(cfg.delta_t()), p_bar, cfg.slices);
    ZenoRow row;
    row.slices = cfg.slices;
    row.delta_t = cfg.delta_t();
    row.frobenius_error = (z.matrix - reference).norm();
    return row;
  });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double ratio = rows[i - 1].frobenius_error / rows[i].frobenius_error;
    const double k_ratio = static_cast<double>(rows[i].slices) / rows[i - 1].slices;
    rows[i].empirical_order = std::log(ratio) / std::log(k_ratio);
  }
  return rows;
}

}  // namespace pdx
