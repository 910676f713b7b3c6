#pragma once

#include <cmath>
#include <complex>
#include <sstream>
#include <string>
#include <utility>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "pdx/errors.hpp"
#include "pdx/grid.hpp"

namespace pdx {

inline double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

/// Dense Hermitian operator on the grid.
class HermitianMatrix {
 public:
  static constexpr double kHermiticityTol = 1e-12;

  HermitianMatrix() = default;

  /// Takes ownership of `m` after checking ||m - m^H||_max <= 1e-12 ||m||_max.
  explicit HermitianMatrix(Mat m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) throw DimensionError("Hermitian matrix must be square");
    const double scale = std::max(max_abs(m_), 1.0e-300);
    const double skew = max_abs(m_ - m_.adjoint());
    if (skew > kHermiticityTol * scale) {
      std::ostringstream os;
      os << "matrix is not Hermitian: ||H - H^H||_max = " << skew << " for ||H||_max = " << scale;
      throw DomainError(os.str());
    }
    // symmetrize away rounding so downstream solvers see an exactly Hermitian input
    m_ = 0.5 * (m_ + m_.adjoint()).eval();
  }

  [[nodiscard]] const Mat& matrix() const { return m_; }
  [[nodiscard]] Eigen::Index order() const { return m_.rows(); }

  /// True when every entry is real, which enables the real symmetric solver.
  [[nodiscard]] bool is_real() const { return m_.imag().cwiseAbs().maxCoeff() == 0.0; }

 private:
  Mat m_;
};

/// Three-point finite-difference Hamiltonian -hbar^2/(2m) d^2/dx^2 + V(x).
inline HermitianMatrix build_hamiltonian(const Model& model) {
  const GridModel& grid = model.grid;
  grid.validate();
  model.params.validate();
  const auto n = static_cast<Eigen::Index>(grid.size());
  const double dx = grid.dx();
  const double c = model.params.hbar * model.params.hbar / (2.0 * model.params.mass * dx * dx);
  const RealVec v = model.potential.sample(grid, model.params);

  Mat h = Mat::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    h(j, j) = 2.0 * c + v[j];
    if (j + 1 < n) {
      h(j, j + 1) = -c;
      h(j + 1, j) = -c;
    }
  }
  if (grid.boundary == Boundary::periodic) {
    h(0, n - 1) = -c;
    h(n - 1, 0) = -c;
  }
  return HermitianMatrix(std::move(h));
}

inline HermitianMatrix build_hamiltonian(const GridModel& grid, const PhysicalParams& params,
                                         const PotentialSpec& potential) {
  return build_hamiltonian(Model{grid, params, potential});
}

/// H = V diag(lambda) V^H with ascending eigenvalues and orthonormal V.
struct SpectralDecomposition {
  RealVec eigenvalues;
  Mat eigenvectors;
  /// Set when V is real (real symmetric input); lets callers skip complex work.
  bool real_vectors = false;

  [[nodiscard]] Eigen::Index order() const { return eigenvalues.size(); }

  [[nodiscard]] Mat reconstruct() const {
    return eigenvectors * eigenvalues.cast<cplx>().asDiagonal() * eigenvectors.adjoint();
  }
};

inline SpectralDecomposition spectral_decompose(const HermitianMatrix& h) {
  SpectralDecomposition out;
  const auto n = h.order();
  if (n == 0) return out;
  if (h.is_real()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h.matrix().real());
    if (solver.info() != Eigen::Success) {
      std::ostringstream os;
      os << "real symmetric eigensolver did not converge (order " << n
         << ", ||H||_max = " << max_abs(h.matrix()) << ")";
      throw NumericError(os.str());
    }
    out.eigenvalues = solver.eigenvalues();
    out.eigenvectors = solver.eigenvectors().cast<cplx>();
    out.real_vectors = true;
  } else {
    Eigen::SelfAdjointEigenSolver<Mat> solver(h.matrix());
    if (solver.info() != Eigen::Success) {
      std::ostringstream os;
      os << "Hermitian eigensolver did not converge (order " << n
         << ", ||H||_max = " << max_abs(h.matrix()) << ")";
      throw NumericError(os.str());
    }
    out.eigenvalues = solver.eigenvalues();
    out.eigenvectors = solver.eigenvectors();
  }
  if (!out.eigenvalues.allFinite() || !out.eigenvectors.allFinite()) {
    throw NumericError("eigendecomposition produced non-finite values");
  }
  return out;
}

/// Unitary evolution operator U(t_to, t_from) on the grid.
struct PropagatorMatrix {
  Mat entries;
  double t_from = 0.0;
  double t_to = 0.0;

  [[nodiscard]] double span() const { return t_to - t_from; }
  [[nodiscard]] double unitarity_defect() const {
    const auto n = entries.rows();
    return max_abs(entries.adjoint() * entries - Mat::Identity(n, n));
  }
};

inline Vec phases(const RealVec& eigenvalues, double hbar, double t) {
  Vec out(eigenvalues.size());
  for (Eigen::Index k = 0; k < eigenvalues.size(); ++k) {
    out[k] = std::polar(1.0, -eigenvalues[k] * t / hbar);
  }
  return out;
}

/// U = V exp(-i Lambda t / hbar) V^H. Negative t gives the inverse.
inline PropagatorMatrix propagator(const SpectralDecomposition& decomp, const PhysicalParams& params,
                                   double t, double t_from = 0.0) {
  if (!std::isfinite(t)) throw DomainError("propagation time must be finite");
  PropagatorMatrix u;
  u.t_from = t_from;
  u.t_to = t_from + t;
  const auto n = decomp.order();
  if (t == 0.0) {
    u.entries = Mat::Identity(n, n);
    return u;
  }
  const Vec ph = phases(decomp.eigenvalues, params.hbar, t);
  u.entries = decomp.eigenvectors * ph.asDiagonal() * decomp.eigenvectors.adjoint();
  return u;
}

/// ||U(t1 + t2) - U(t2) U(t1)||_max.
inline double composition_residual(const SpectralDecomposition& decomp, const PhysicalParams& params,
                                   double t1, double t2) {
  if (!std::isfinite(t1) || !std::isfinite(t2)) throw DomainError("times must be finite");
  const Mat whole = propagator(decomp, params, t1 + t2).entries;
  const Mat split = propagator(decomp, params, t2).entries * propagator(decomp, params, t1).entries;
  return max_abs(whole - split);
}

/// Model with its Hamiltonian and spectrum; applies U(t) to vectors in O(n^2).
class System {
 public:
  explicit System(Model model)
      : model_(std::move(model)), h_(build_hamiltonian(model_)), decomp_(spectral_decompose(h_)) {}

  [[nodiscard]] const Model& model() const { return model_; }
  [[nodiscard]] const GridModel& grid() const { return model_.grid; }
  [[nodiscard]] const PhysicalParams& params() const { return model_.params; }
  [[nodiscard]] const HermitianMatrix& hamiltonian() const { return h_; }
  [[nodiscard]] const SpectralDecomposition& spectrum() const { return decomp_; }
  [[nodiscard]] Eigen::Index dim() const { return decomp_.order(); }

  /// Coefficients in the eigenbasis, V^H v.
  [[nodiscard]] Vec to_eigenbasis(const Vec& v) const { return decomp_.eigenvectors.adjoint() * v; }

  [[nodiscard]] Vec evolve(const Vec& v, double t) const {
    if (t == 0.0) return v;
    return decomp_.eigenvectors * phases(decomp_.eigenvalues, model_.params.hbar, t).cwiseProduct(to_eigenbasis(v));
  }

  /// Entry j of U(t) v given eigenbasis coefficients c = V^H v.
  [[nodiscard]] cplx evolved_entry(const Vec& coeffs, double t, Eigen::Index j) const {
    const Vec ph = phases(decomp_.eigenvalues, model_.params.hbar, t);
    return decomp_.eigenvectors.row(j).transpose().cwiseProduct(ph.cwiseProduct(coeffs)).sum();
  }

  [[nodiscard]] PropagatorMatrix propagator(double t, double t_from = 0.0) const {
    return pdx::propagator(decomp_, model_.params, t, t_from);
  }

 private:
  Model model_;
  HermitianMatrix h_;
  SpectralDecomposition decomp_;
};

}  // namespace pdx
