#pragma once

// Evolution engines.
//
//   evolve_unitary                 rho(t) = e^{-iHt} rho0 e^{iHt}
//   evolve_relational_quadrature   sum_k w_k rho(t_k) over the kernel's rule
//   evolve_relational_dephasing    [rho_B]_{ij} = chi(E_i - E_j) [rho0]_{ij}
//                                  in the energy eigenbasis
//   evolve_pearle                  (2 pi)^{-1/2} \int d eta e^{-eta^2/2}
//                                    rho(t - sqrt(lambda t) eta)
//
// All exponentials go through the Hamiltonian's cached eigenbasis.

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "reltime/kernels.hpp"
#include "reltime/qmat.hpp"

namespace reltime {

enum class Method { Unitary, RelationalQuadrature, RelationalDephasing, PearleCollapse };

inline constexpr double kTraceDriftLimit = 1e-8;
inline constexpr double kCompleteDecoherenceThreshold = 1e-6;
inline constexpr std::size_t kMaxGaussHermiteNodes = 512;

struct EvolutionResult {
  DensityMatrix state;
  double time_label = 0.0;  // t_A for unitary, t_B for relational and collapse
  Method method = Method::Unitary;
  std::size_t node_count = 0;  // 0 for closed-form paths
};

namespace detail {

// Energies closer than this (relative to the spectral scale) count as equal.
inline double degeneracy_tolerance(const Hamiltonian& h) {
  const double scale = h.spectrum().size() ? h.spectrum().cwiseAbs().maxCoeff() : 0.0;
  return 1e-9 * std::max(1.0, scale);
}

inline void check_trace_drift(const ComplexMatrix& m) {
  const double drift = std::abs(m.trace() - complex(1.0, 0.0));
  if (drift > kTraceDriftLimit) {
    throw Error(ErrorCode::QuadratureDrift,
                "kernel-averaged state has trace drift " + fmt(drift) + " (limit 1e-8); use more nodes", drift);
  }
}

inline DensityMatrix finish_average(const ComplexMatrix& m) {
  check_trace_drift(m);
  const ComplexMatrix herm = hermitian_part(m);
  return make_density(herm / herm.trace().real());
}

// sum_k w_k D(t_k) rho_e D(t_k)^dagger with D(t) = diag(e^{-i E t}), where
// rho_e is already expressed in the energy eigenbasis. Summation runs in node
// order.
inline ComplexMatrix average_phases(const ComplexMatrix& rho_e, const RealVector& energies,
                                    const std::vector<double>& times, const std::vector<double>& weights) {
  const Eigen::Index n = rho_e.rows();
  ComplexMatrix factor = ComplexMatrix::Zero(n, n);
  ComplexVector phase(n);
  for (std::size_t k = 0; k < times.size(); ++k) {
    for (Eigen::Index i = 0; i < n; ++i) phase(i) = std::polar(1.0, -energies(i) * times[k]);
    factor.noalias() += weights[k] * (phase * phase.adjoint());
  }
  return factor.cwiseProduct(rho_e);
}

// An n-node Gauss-Hermite rule integrates e^{-i omega t} against a Gaussian of
// width sigma to ~1e-15 while omega sigma <= 1.2 sqrt(n) and fails abruptly
// beyond. The requested count is raised to cover the widest gap of h.
inline std::size_t resolving_nodes(const Hamiltonian& h, double sigma, std::size_t requested) {
  const RealVector& e = h.spectrum();
  const double reach = (e.size() ? e.maxCoeff() - e.minCoeff() : 0.0) * sigma / 1.2;
  if (!(reach * reach <= static_cast<double>(kMaxGaussHermiteNodes))) {
    throw Error(ErrorCode::QuadratureDrift,
                "Gaussian kernel too broad for the spectrum: gap * width = " + fmt(1.2 * reach) + " needs more than " +
                    std::to_string(kMaxGaussHermiteNodes) + " Gauss-Hermite nodes; use the closed-form dephasing path",
                1.2 * reach);
  }
  return std::max(requested, static_cast<std::size_t>(std::ceil(reach * reach)));
}

}  // namespace detail

inline EvolutionResult evolve_unitary(const DensityMatrix& rho0, const Hamiltonian& h, double t) {
  detail::require_dims(rho0.dim(), h.dim(), "evolve_unitary");
  const ComplexMatrix u = h.propagator(t);
  ComplexMatrix out = hermitian_part(u * rho0.matrix() * u.adjoint());
  out /= out.trace().real();
  return {make_density(out), t, Method::Unitary, 0};
}

/// Kernel average evaluated node by node over quadrature_for(kernel, nodes).
/// For Gaussian kernels `nodes` is a floor; see detail::resolving_nodes.
inline EvolutionResult evolve_relational_quadrature(const DensityMatrix& rho0, const Hamiltonian& h,
                                                    const TimeKernel& kernel, std::size_t nodes = kDefaultNodes) {
  detail::require_dims(rho0.dim(), h.dim(), "evolve_relational_quadrature");
  if (kernel.kind() == KernelKind::Gaussian && nodes > 0) {
    nodes = detail::resolving_nodes(h, kernel.gaussian_width(), nodes);
  }
  const QuadratureRule rule = quadrature_for(kernel, nodes);
  const ComplexMatrix rho_e = to_energy_basis(h, rho0.matrix());
  const ComplexMatrix avg = detail::average_phases(rho_e, h.spectrum(), rule.nodes(), rule.weights());
  return {detail::finish_average(from_energy_basis(h, avg)), kernel.watch_reading(), Method::RelationalQuadrature,
          rule.node_count()};
}

/// Closed-form kernel average: each energy-basis element picks up chi(E_i - E_j).
inline EvolutionResult evolve_relational_dephasing(const DensityMatrix& rho0, const Hamiltonian& h,
                                                   const TimeKernel& kernel) {
  detail::require_dims(rho0.dim(), h.dim(), "evolve_relational_dephasing");
  if (kernel.kind() == KernelKind::Delta && kernel.watch_reading() == 0.0) {
    return {rho0, 0.0, Method::RelationalDephasing, 0};
  }
  const Eigen::Index n = static_cast<Eigen::Index>(h.dim());
  const RealVector& e = h.spectrum();
  ComplexMatrix rho_e = to_energy_basis(h, rho0.matrix());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const complex chi = characteristic(kernel, e(i) - e(j)).value;
      rho_e(i, j) *= chi;
      rho_e(j, i) *= std::conj(chi);
    }
  }
  const std::size_t used = kernel.kind() == KernelKind::Tabulated ? kernel.table().size() : 0;
  return {detail::finish_average(from_energy_basis(h, rho_e)), kernel.watch_reading(), Method::RelationalDephasing,
          used};
}

/// Ensemble-level energy-driven collapse, integrated over eta with
/// Gauss-Hermite nodes. Effective times t - sqrt(lambda t) eta may be
/// negative and are evolved as-is. `nodes` is a floor as for the Gaussian
/// relational quadrature.
inline EvolutionResult evolve_pearle(const DensityMatrix& rho0, const Hamiltonian& h, double lambda, double t,
                                     std::size_t nodes = kDefaultNodes) {
  detail::require_dims(rho0.dim(), h.dim(), "evolve_pearle");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::NonPositiveLambda, "collapse rate lambda must be > 0", lambda);
  }
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw Error(ErrorCode::InvalidArgument, "collapse evolution needs t >= 0");
  }
  if (t == 0.0) return {rho0, 0.0, Method::PearleCollapse, 0};

  // eta = sqrt(2) x turns e^{-eta^2/2} d eta into e^{-x^2} dx.
  const double spread = std::sqrt(lambda * t);
  if (nodes > 0) nodes = detail::resolving_nodes(h, spread, nodes);
  const HermiteRule gh = gauss_hermite(nodes);
  double total = 0.0;
  for (double w : gh.weights) total += w;
  std::vector<double> times(nodes), weights(nodes);
  for (std::size_t k = 0; k < nodes; ++k) {
    times[k] = t - spread * std::numbers::sqrt2 * gh.nodes[k];
    weights[k] = gh.weights[k] / total;
  }
  const ComplexMatrix rho_e = to_energy_basis(h, rho0.matrix());
  const ComplexMatrix avg = detail::average_phases(rho_e, h.spectrum(), times, weights);
  return {detail::finish_average(from_energy_basis(h, avg)), t, Method::PearleCollapse, nodes};
}

struct CoherencePair {
  Eigen::Index i = 0;
  Eigen::Index j = 0;
  double energy_i = 0.0;
  double energy_j = 0.0;
  double magnitude_a = 0.0;
  double magnitude_b = 0.0;
  bool distinct_energy = false;
};

struct CoherenceReport {
  std::vector<CoherencePair> pairs;  // i < j, energy eigenbasis
  double max_offdiag_b = 0.0;        // over distinct-energy pairs only
  bool complete_decoherence = true;  // vacuously true without distinct pairs
};

/// Energy-basis coherences before (Alice, any t_A) and after (Bob) kernel
/// averaging. Inside a degenerate eigenspace the individual entries depend on
/// the chosen eigenbasis; the flag does not.
inline CoherenceReport coherence_report(const DensityMatrix& rho0, const Hamiltonian& h, const TimeKernel& kernel,
                                        double threshold = kCompleteDecoherenceThreshold) {
  detail::require_dims(rho0.dim(), h.dim(), "coherence_report");
  const Eigen::Index n = static_cast<Eigen::Index>(h.dim());
  const RealVector& e = h.spectrum();
  const double degenerate = detail::degeneracy_tolerance(h);
  const ComplexMatrix rho_e = to_energy_basis(h, rho0.matrix());

  CoherenceReport report;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      CoherencePair p;
      p.i = i;
      p.j = j;
      p.energy_i = e(i);
      p.energy_j = e(j);
      p.distinct_energy = std::abs(e(i) - e(j)) > degenerate;
      p.magnitude_a = std::abs(rho_e(i, j));
      p.magnitude_b = p.distinct_energy ? std::abs(characteristic(kernel, e(i) - e(j)).value) * p.magnitude_a
                                        : p.magnitude_a;
      if (p.distinct_energy) report.max_offdiag_b = std::max(report.max_offdiag_b, p.magnitude_b);
      report.pairs.push_back(p);
    }
  }
  report.complete_decoherence = report.max_offdiag_b < threshold;
  return report;
}

/// Largest |rho_{ij}| in the energy eigenbasis over pairs with E_i != E_j.
inline double max_offdiag_energy_basis(const DensityMatrix& rho, const Hamiltonian& h) {
  const ComplexMatrix rho_e = to_energy_basis(h, rho.matrix());
  const double degenerate = detail::degeneracy_tolerance(h);
  double out = 0.0;
  for (Eigen::Index i = 0; i < rho_e.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < rho_e.cols(); ++j) {
      if (std::abs(h.spectrum()(i) - h.spectrum()(j)) > degenerate) out = std::max(out, std::abs(rho_e(i, j)));
    }
  }
  return out;
}

/// Distinct positive energy gaps E_j - E_i, ascending, merged within the
/// degeneracy tolerance.
inline std::vector<double> energy_gaps(const Hamiltonian& h) {
  const double degenerate = detail::degeneracy_tolerance(h);
  std::vector<double> gaps;
  const RealVector& e = h.spectrum();
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    for (Eigen::Index j = i + 1; j < e.size(); ++j) {
      if (e(j) - e(i) > degenerate) gaps.push_back(e(j) - e(i));
    }
  }
  std::sort(gaps.begin(), gaps.end());
  std::vector<double> merged;
  for (double g : gaps) {
    if (merged.empty() || g - merged.back() > degenerate) merged.push_back(g);
  }
  return merged;
}

}  // namespace reltime
