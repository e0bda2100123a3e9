#pragma once

// Finite ideal clocks and conditional readout.
//
// The clock has d orthonormal pointer states |t_m>, t_m = m * tick, and a
// Hamiltonian whose one-tick propagator is the cyclic shift
// |t_m> -> |t_{m+1 mod d}>. Evolution is periodic with period d * tick; a
// scenario only stays faithful while elapsed time is below one period, so
// valid conditioning times are t_0 .. t_{d-1} with the clock started at t_0.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "reltime/evolution.hpp"
#include "reltime/kernels.hpp"
#include "reltime/qmat.hpp"

namespace reltime {

inline constexpr double kZeroProbability = 1e-12;
inline constexpr double kPointerTolerance = 1e-9;

class ClockSystem {
 public:
  std::size_t dim() const { return dim_; }
  double tick() const { return tick_; }
  double period() const { return tick_ * static_cast<double>(dim_); }
  const Hamiltonian& hamiltonian() const { return hamiltonian_; }

  double pointer_time(std::size_t m) const { return tick_ * static_cast<double>(m); }

  std::vector<double> pointer_times() const {
    std::vector<double> out(dim_);
    for (std::size_t m = 0; m < dim_; ++m) out[m] = pointer_time(m);
    return out;
  }

  /// Index m with t = m * tick; throws NotPointerTime off the grid.
  std::size_t pointer_index(double t) const {
    const double x = t / tick_;
    const double m = std::round(x);
    if (!std::isfinite(x) || std::abs(x - m) > kPointerTolerance || m < 0.0 || m >= static_cast<double>(dim_)) {
      throw Error(ErrorCode::NotPointerTime, "time " + detail::fmt(t) + " is not a pointer time of a clock with " +
                                                 std::to_string(dim_) + " ticks of " + detail::fmt(tick_));
    }
    return static_cast<std::size_t>(m);
  }

  bool is_pointer_time(double t) const {
    try {
      pointer_index(t);
      return true;
    } catch (const Error&) {
      return false;
    }
  }

  /// Clock observable T = sum_m t_m |t_m><t_m|.
  Observable time_observable() const {
    ComplexMatrix t = ComplexMatrix::Zero(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
    for (std::size_t m = 0; m < dim_; ++m) t(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m)) = pointer_time(m);
    return Observable(t);
  }

  ComplexMatrix projector(std::size_t m) const {
    ComplexMatrix p = ComplexMatrix::Zero(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
    p(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m)) = 1.0;
    return p;
  }

  DensityMatrix pointer_state(std::size_t m) const { return basis_state(dim_, m); }

  friend ClockSystem make_ideal_clock(std::size_t, double);

 private:
  ClockSystem(std::size_t d, double tick, Hamiltonian h) : dim_(d), tick_(tick), hamiltonian_(std::move(h)) {}

  std::size_t dim_;
  double tick_;
  Hamiltonian hamiltonian_;
};

/// H_C is diagonal in the discrete Fourier basis of the pointer states,
/// |k~> = d^{-1/2} sum_m e^{2 pi i k m / d} |t_m>, with frequency
/// omega_k = 2 pi k / (d tick). Then e^{-i H_C tick} shifts t_m to t_{m+1}.
inline ClockSystem make_ideal_clock(std::size_t d, double tick) {
  if (d < 2) throw Error(ErrorCode::InvalidDimension, "clock needs at least 2 pointer states");
  if (!(tick > 0.0) || !std::isfinite(tick)) {
    throw Error(ErrorCode::InvalidArgument, "clock tick must be positive and finite");
  }
  const auto n = static_cast<Eigen::Index>(d);
  const double dd = static_cast<double>(d);
  ComplexMatrix fourier(n, n);
  RealVector omega(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    omega(k) = 2.0 * std::numbers::pi * static_cast<double>(k) / (dd * tick);
    for (Eigen::Index m = 0; m < n; ++m) {
      fourier(m, k) = std::polar(1.0 / std::sqrt(dd), 2.0 * std::numbers::pi * static_cast<double>(k * m) / dd);
    }
  }
  const ComplexMatrix h = fourier * omega.cast<complex>().asDiagonal() * fourier.adjoint();
  return ClockSystem(d, tick, spectral_decompose(hermitian_part(h)));
}

/// System S together with an internal clock C, H_Q = H_S (x) I + I (x) H_C,
/// rho_Q(0) = rho_S(0) (x) |t_0><t_0|.
class CompositeScenario {
 public:
  CompositeScenario(Hamiltonian system_h, DensityMatrix system_state, ClockSystem clock)
      : system_h_(std::move(system_h)),
        system_state_(std::move(system_state)),
        clock_(std::move(clock)),
        composite_h_(kron_sum(system_h_, clock_.hamiltonian())),
        initial_(tensor(system_state_, clock_.pointer_state(0))) {
    detail::require_dims(system_h_.dim(), system_state_.dim(), "composite scenario");
  }

  const Hamiltonian& system_hamiltonian() const { return system_h_; }
  const DensityMatrix& system_state() const { return system_state_; }
  const ClockSystem& clock() const { return clock_; }
  const Hamiltonian& composite_hamiltonian() const { return composite_h_; }
  const DensityMatrix& initial_state() const { return initial_; }
  std::size_t system_dim() const { return system_h_.dim(); }

 private:
  Hamiltonian system_h_;
  DensityMatrix system_state_;
  ClockSystem clock_;
  Hamiltonian composite_h_;
  DensityMatrix initial_;
};

/// Tr[(N (x) P_m) rho] / Tr[(I (x) P_m) rho] for a state on K (x) C, where
/// K is the left factor of dimension N.dim().
inline double conditional_expectation(const ComplexMatrix& rho, const ComplexMatrix& n, std::size_t clock_dim,
                                      std::size_t m) {
  const auto dk = n.rows();
  const auto dc = static_cast<Eigen::Index>(clock_dim);
  if (rho.rows() != dk * dc) {
    throw Error(ErrorCode::DimensionMismatch, "conditional expectation: state dimension does not match N (x) P_t");
  }
  const auto mi = static_cast<Eigen::Index>(m);
  ComplexMatrix block(dk, dk);
  for (Eigen::Index s = 0; s < dk; ++s) {
    for (Eigen::Index r = 0; r < dk; ++r) block(s, r) = rho(s * dc + mi, r * dc + mi);
  }
  const double probability = block.trace().real();
  if (!(probability >= kZeroProbability)) {
    throw Error(ErrorCode::ZeroProbability,
                "clock reading has probability " + detail::fmt(probability) + "; conditioning is undefined",
                probability);
  }
  return trace_of_product(n, block).real() / probability;
}

/// Expected N given the clock reads t_A, when the time is known to be t_A.
/// Evaluates both the direct trace on S and the projective conditioning of
/// the composite state and requires them to agree.
inline double alice_conditional(const CompositeScenario& sc, const Observable& n, double t_a) {
  detail::require_dims(n.dim(), sc.system_dim(), "alice_conditional");
  const std::size_t m = sc.clock().pointer_index(t_a);

  const double direct = expectation(n, evolve_unitary(sc.system_state(), sc.system_hamiltonian(), t_a).state);
  const EvolutionResult composite = evolve_unitary(sc.initial_state(), sc.composite_hamiltonian(), t_a);
  const double conditioned = conditional_expectation(composite.state.matrix(), n.matrix(), sc.clock().dim(), m);

  const double gap = std::abs(direct - conditioned);
  if (gap > 1e-9 * std::max(1.0, max_norm(n.matrix()))) {
    throw Error(ErrorCode::InconsistentConditioning,
                "direct and conditioned expectations differ by " + detail::fmt(gap), gap);
  }
  return direct;
}

/// Kernels used with a clock must put all their weight on pointer times.
inline void require_on_grid(const ClockSystem& clock, const TimeKernel& kernel) {
  auto check = [&](double t) {
    if (!clock.is_pointer_time(t)) {
      throw Error(ErrorCode::KernelOffGrid, "kernel support point " + detail::fmt(t) + " is not a pointer time");
    }
  };
  switch (kernel.kind()) {
    case KernelKind::Delta: check(kernel.watch_reading()); return;
    case KernelKind::Tabulated:
      for (const auto& row : kernel.table()) check(row.first);
      return;
    default:
      throw Error(ErrorCode::KernelOffGrid,
                  std::string(kind_name(kernel.kind())) + " kernel is continuous; clocks need a delta or tabulated "
                                                          "kernel on the pointer grid");
  }
}

/// Kernel-averaged composite state sum_{t_A} P(t_A|t_B) rho_{S,A}(t_A) (x) |t_A><t_A|,
/// obtained by averaging the composite unitary evolution over the kernel.
inline DensityMatrix bob_composite_state(const CompositeScenario& sc, const TimeKernel& kernel) {
  require_on_grid(sc.clock(), kernel);
  return evolve_relational_quadrature(sc.initial_state(), sc.composite_hamiltonian(), kernel).state;
}

/// Conditional expectation of N on S given the clock reads t, from a
/// composite state.
inline double conditional_on_reading(const CompositeScenario& sc, const DensityMatrix& rho_q, const Observable& n,
                                     double t) {
  detail::require_dims(n.dim(), sc.system_dim(), "conditional_on_reading");
  return conditional_expectation(rho_q.matrix(), n.matrix(), sc.clock().dim(), sc.clock().pointer_index(t));
}

inline double bob_conditional(const CompositeScenario& sc, const TimeKernel& kernel, const Observable& n, double t) {
  detail::require_dims(n.dim(), sc.system_dim(), "bob_conditional");
  const std::size_t m = sc.clock().pointer_index(t);
  const DensityMatrix rho_q = bob_composite_state(sc, kernel);
  return conditional_expectation(rho_q.matrix(), n.matrix(), sc.clock().dim(), m);
}

/// Unconditioned Tr[(N (x) I) rho_Q].
inline double system_expectation(const CompositeScenario& sc, const DensityMatrix& rho_q, const Observable& n) {
  const ComplexMatrix reduced = partial_trace(rho_q.matrix(), sc.system_dim(), sc.clock().dim(), Keep::System);
  detail::require_dims(n.dim(), sc.system_dim(), "system_expectation");
  return trace_of_product(n.matrix(), reduced).real();
}

/// max |rho - Tr_C(rho) (x) Tr_S(rho)|; zero for product states.
inline double system_clock_correlation(const ComplexMatrix& rho, std::size_t dim_s, std::size_t dim_c) {
  const ComplexMatrix rs = partial_trace(rho, dim_s, dim_c, Keep::System);
  const ComplexMatrix rc = partial_trace(rho, dim_s, dim_c, Keep::Clock);
  return max_norm(rho - tensor(rs, rc));
}

struct WallClockAnswers {
  double direct = 0.0;
  double via_compound = 0.0;
};

/// Expected N given the wall clock shows t, computed two ways: directly from
/// the unitary state at t, and by adding the wall clock as an internal clock
/// of (S (x) C) (x) W, kernel-averaging that compound state, and conditioning
/// on the wall-clock reading.
inline WallClockAnswers wall_clock_self_consistency(const CompositeScenario& sc, const TimeKernel& kernel,
                                                    const Observable& n, double t) {
  detail::require_dims(n.dim(), sc.system_dim(), "wall_clock_self_consistency");
  const ClockSystem wall = make_ideal_clock(sc.clock().dim(), sc.clock().tick());
  require_on_grid(wall, kernel);
  const std::size_t m = wall.pointer_index(t);

  WallClockAnswers out;
  out.direct = expectation(n, evolve_unitary(sc.system_state(), sc.system_hamiltonian(), t).state);

  const Hamiltonian h = kron_sum(sc.composite_hamiltonian(), wall.hamiltonian());
  const DensityMatrix rho0 = tensor(sc.initial_state(), wall.pointer_state(0));
  const DensityMatrix rho_b = evolve_relational_quadrature(rho0, h, kernel).state;
  const auto dc = static_cast<Eigen::Index>(sc.clock().dim());
  const ComplexMatrix n_q = tensor(n.matrix(), ComplexMatrix::Identity(dc, dc));
  out.via_compound = conditional_expectation(rho_b.matrix(), n_q, wall.dim(), m);
  return out;
}

}  // namespace reltime
