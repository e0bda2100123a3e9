#pragma once

// Dense complex linear algebra and validated quantum-state types.
//
// Composite index convention, shared by every module: for a bipartite space
// S (x) C the left factor S is the slow index and the right factor C the fast
// one, i.e. basis state |s>|c> sits at row s * dim_C + c.

#include <Eigen/Dense>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "reltime/errors.hpp"

namespace reltime {

using complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr std::size_t kDefaultDimensionCap = 4096;

/// Numerical budgets for the density-matrix validators.
struct Tolerances {
  double hermitian = 1e-10;
  double trace = 1e-10;
  double psd = 1e-9;
};

inline double max_norm(const ComplexMatrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline ComplexMatrix hermitian_part(const ComplexMatrix& m) {
  return 0.5 * (m + m.adjoint());
}

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

inline void require_square(const ComplexMatrix& m, const char* what) {
  if (m.rows() == 0 || m.rows() != m.cols()) {
    throw Error(ErrorCode::NotSquare, std::string(what) + " must be a non-empty square matrix, got " +
                                          std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

inline void require_finite(const ComplexMatrix& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(ErrorCode::NonFinite, std::string(what) + " has non-finite entries");
  }
}

inline void require_hermitian(const ComplexMatrix& m, double tol, const char* what) {
  const double violation = max_norm(m - m.adjoint());
  if (violation > tol) {
    throw Error(ErrorCode::NotHermitian,
                std::string(what) + " is not Hermitian: max|M - M^dagger| = " + fmt(violation),
                violation);
  }
}

inline void require_dims(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": dimension " + std::to_string(a) +
                                                  " does not match " + std::to_string(b));
  }
}

}  // namespace detail

/// Validated quantum state: Hermitian, unit trace, positive semidefinite.
/// Instances are immutable; the only way in is make_density().
class DensityMatrix {
 public:
  std::size_t dim() const { return static_cast<std::size_t>(matrix_.rows()); }
  const ComplexMatrix& matrix() const { return matrix_; }
  complex operator()(Eigen::Index i, Eigen::Index j) const { return matrix_(i, j); }

 private:
  explicit DensityMatrix(ComplexMatrix m) : matrix_(std::move(m)) {}
  friend DensityMatrix make_density(const ComplexMatrix&, const Tolerances&);

  ComplexMatrix matrix_;
};

inline DensityMatrix make_density(const ComplexMatrix& matrix, const Tolerances& tol = {}) {
  detail::require_square(matrix, "density matrix");
  detail::require_finite(matrix, "density matrix");
  detail::require_hermitian(matrix, tol.hermitian, "density matrix");

  const double trace_error = std::abs(matrix.trace() - complex(1.0, 0.0));
  if (trace_error > tol.trace) {
    throw Error(ErrorCode::TraceNotOne,
                "density matrix trace is " + detail::fmt(matrix.trace().real()) + ", expected 1 (|Tr - 1| = " +
                    detail::fmt(trace_error) + ")",
                trace_error);
  }

  const ComplexMatrix herm = hermitian_part(matrix);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(herm, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::EigensolverFailure, "eigensolver did not converge while checking positivity");
  }
  const double smallest = solver.eigenvalues()(0);
  if (smallest < -tol.psd) {
    throw Error(ErrorCode::NotPositive,
                "density matrix is not positive semidefinite: smallest eigenvalue " + detail::fmt(smallest),
                -smallest);
  }
  return DensityMatrix(herm);
}

/// Hermitian operator with its spectral decomposition cached.
/// spectrum() is ascending and eigenbasis() holds the eigenvectors as columns.
class Hamiltonian {
 public:
  std::size_t dim() const { return static_cast<std::size_t>(matrix_.rows()); }
  const ComplexMatrix& matrix() const { return matrix_; }
  const RealVector& spectrum() const { return spectrum_; }
  const ComplexMatrix& eigenbasis() const { return eigenbasis_; }

  /// e^{-iHt} assembled from the cached decomposition.
  ComplexMatrix propagator(double t) const {
    const ComplexVector phases = (spectrum_.cast<complex>() * complex(0.0, -t)).array().exp().matrix();
    return eigenbasis_ * phases.asDiagonal() * eigenbasis_.adjoint();
  }

 private:
  Hamiltonian(ComplexMatrix m, RealVector e, ComplexMatrix u)
      : matrix_(std::move(m)), spectrum_(std::move(e)), eigenbasis_(std::move(u)) {}
  friend Hamiltonian spectral_decompose(const ComplexMatrix&, const Tolerances&);
  friend Hamiltonian kron_sum(const Hamiltonian&, const Hamiltonian&, std::size_t);

  ComplexMatrix matrix_;
  RealVector spectrum_;
  ComplexMatrix eigenbasis_;
};

inline Hamiltonian spectral_decompose(const ComplexMatrix& h, const Tolerances& tol = {}) {
  detail::require_square(h, "Hamiltonian");
  detail::require_finite(h, "Hamiltonian");
  detail::require_hermitian(h, tol.hermitian, "Hamiltonian");

  const ComplexMatrix herm = hermitian_part(h);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(herm);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::EigensolverFailure, "Hermitian eigensolver did not converge");
  }
  // Eigen returns eigenvalues in increasing order.
  return Hamiltonian(herm, solver.eigenvalues(), solver.eigenvectors());
}

inline Hamiltonian diagonal_hamiltonian(const std::vector<double>& energies) {
  RealVector e = Eigen::Map<const RealVector>(energies.data(), static_cast<Eigen::Index>(energies.size()));
  return spectral_decompose(e.cast<complex>().asDiagonal().toDenseMatrix());
}

/// Hermitian operator whose expectation values are taken against states.
class Observable {
 public:
  explicit Observable(const ComplexMatrix& m, const Tolerances& tol = {}) {
    detail::require_square(m, "observable");
    detail::require_finite(m, "observable");
    detail::require_hermitian(m, tol.hermitian, "observable");
    matrix_ = hermitian_part(m);
  }

  std::size_t dim() const { return static_cast<std::size_t>(matrix_.rows()); }
  const ComplexMatrix& matrix() const { return matrix_; }

 private:
  ComplexMatrix matrix_;
};

/// Kronecker product A (x) B; A is the slow (left) factor.
inline ComplexMatrix tensor(const ComplexMatrix& a, const ComplexMatrix& b,
                            std::size_t dimension_cap = kDefaultDimensionCap) {
  const auto rows = static_cast<std::size_t>(a.rows() * b.rows());
  const auto cols = static_cast<std::size_t>(a.cols() * b.cols());
  if (rows > dimension_cap || cols > dimension_cap) {
    throw Error(ErrorCode::DimensionOverflow, "tensor product dimension " + std::to_string(std::max(rows, cols)) +
                                                  " exceeds cap " + std::to_string(dimension_cap));
  }
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b,
                            std::size_t dimension_cap = kDefaultDimensionCap) {
  return make_density(tensor(a.matrix(), b.matrix(), dimension_cap));
}

/// H_A (x) I + I (x) H_B. The eigenbasis is the product of the factor
/// eigenbases, so no new diagonalization is needed.
inline Hamiltonian kron_sum(const Hamiltonian& a, const Hamiltonian& b,
                            std::size_t dimension_cap = kDefaultDimensionCap) {
  const auto da = static_cast<Eigen::Index>(a.dim());
  const auto db = static_cast<Eigen::Index>(b.dim());
  ComplexMatrix m = tensor(a.matrix(), ComplexMatrix::Identity(db, db), dimension_cap) +
                    tensor(ComplexMatrix::Identity(da, da), b.matrix(), dimension_cap);
  const ComplexMatrix u = tensor(a.eigenbasis(), b.eigenbasis(), dimension_cap);

  RealVector e(da * db);
  for (Eigen::Index i = 0; i < da; ++i) {
    for (Eigen::Index j = 0; j < db; ++j) e(i * db + j) = a.spectrum()(i) + b.spectrum()(j);
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(e.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return e(x) < e(y); });

  RealVector sorted_e(e.size());
  ComplexMatrix sorted_u(u.rows(), u.cols());
  for (Eigen::Index k = 0; k < e.size(); ++k) {
    sorted_e(k) = e(order[static_cast<std::size_t>(k)]);
    sorted_u.col(k) = u.col(order[static_cast<std::size_t>(k)]);
  }
  return Hamiltonian(std::move(m), std::move(sorted_e), std::move(sorted_u));
}

enum class Keep { System, Clock };  // System = left factor, Clock = right factor

inline ComplexMatrix partial_trace(const ComplexMatrix& rho, std::size_t dim_s, std::size_t dim_c, Keep keep) {
  if (dim_s == 0 || dim_c == 0 || static_cast<std::size_t>(rho.rows()) != dim_s * dim_c ||
      rho.rows() != rho.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "partial trace: state of dimension " + std::to_string(rho.rows()) +
                                                  " cannot be split as " + std::to_string(dim_s) + " x " +
                                                  std::to_string(dim_c));
  }
  const auto ds = static_cast<Eigen::Index>(dim_s);
  const auto dc = static_cast<Eigen::Index>(dim_c);
  if (keep == Keep::System) {
    ComplexMatrix out = ComplexMatrix::Zero(ds, ds);
    for (Eigen::Index i = 0; i < ds; ++i) {
      for (Eigen::Index j = 0; j < ds; ++j) out(i, j) = rho.block(i * dc, j * dc, dc, dc).trace();
    }
    return out;
  }
  ComplexMatrix out = ComplexMatrix::Zero(dc, dc);
  for (Eigen::Index s = 0; s < ds; ++s) out += rho.block(s * dc, s * dc, dc, dc);
  return out;
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, std::size_t dim_s, std::size_t dim_c, Keep keep) {
  return make_density(partial_trace(rho.matrix(), dim_s, dim_c, keep));
}

/// Tr(A B) without forming the product.
inline complex trace_of_product(const ComplexMatrix& a, const ComplexMatrix& b) {
  return a.cwiseProduct(b.transpose()).sum();
}

inline double expectation(const Observable& n, const DensityMatrix& rho) {
  detail::require_dims(n.dim(), rho.dim(), "expectation");
  const complex value = trace_of_product(n.matrix(), rho.matrix());
  assert(std::abs(value.imag()) <= 1e-9 * std::max(1.0, max_norm(n.matrix())));
  return value.real();
}

inline double purity(const DensityMatrix& rho) {
  return trace_of_product(rho.matrix(), rho.matrix()).real();
}

/// Pure state |psi><psi| from a (not necessarily normalized) amplitude vector.
inline DensityMatrix pure_state(const ComplexVector& psi) {
  const double norm = psi.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorCode::InvalidArgument, "pure state needs a non-zero finite amplitude vector");
  }
  const ComplexVector v = psi / norm;
  return make_density(v * v.adjoint());
}

inline DensityMatrix basis_state(std::size_t dim, std::size_t k) {
  if (k >= dim) {
    throw Error(ErrorCode::InvalidArgument,
                "basis state index " + std::to_string(k) + " out of range for dimension " + std::to_string(dim));
  }
  ComplexVector v = ComplexVector::Zero(static_cast<Eigen::Index>(dim));
  v(static_cast<Eigen::Index>(k)) = 1.0;
  return pure_state(v);
}

inline DensityMatrix maximally_mixed(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return make_density(ComplexMatrix::Identity(d, d) / static_cast<double>(dim));
}

/// Rotate an operator into the eigenbasis of `h`: U^dagger M U.
inline ComplexMatrix to_energy_basis(const Hamiltonian& h, const ComplexMatrix& m) {
  return h.eigenbasis().adjoint() * m * h.eigenbasis();
}

inline ComplexMatrix from_energy_basis(const Hamiltonian& h, const ComplexMatrix& m) {
  return h.eigenbasis() * m * h.eigenbasis().adjoint();
}

}  // namespace reltime
