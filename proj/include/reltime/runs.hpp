#pragma once

// Sweep drivers behind the command-line tool. Each run returns a ResultTable
// whose CSV form is deterministic for a given scenario, seed and options.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "reltime/clock.hpp"
#include "reltime/evolution.hpp"
#include "reltime/scenario.hpp"

namespace reltime {

inline constexpr std::string_view kEngineVersion = "reltime 1.0.0";

struct RunOptions {
  std::size_t nodes = kDefaultNodes;
  double threshold = kCompleteDecoherenceThreshold;
};

class ResultTable {
 public:
  explicit ResultTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  void add_row(std::vector<double> row) {
    if (row.size() != columns_.size()) {
      throw Error(ErrorCode::InvalidArgument, "result row has " + std::to_string(row.size()) + " values for " +
                                                  std::to_string(columns_.size()) + " columns");
    }
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (!std::isfinite(row[k])) {
        throw Error(ErrorCode::NonFinite, "non-finite value in column " + columns_[k]);
      }
    }
    rows_.push_back(std::move(row));
  }

  void add_metadata(std::string key, std::string value) { metadata_.emplace_back(std::move(key), std::move(value)); }
  void add_footer(std::string key, std::string value) { footer_.emplace_back(std::move(key), std::move(value)); }

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::vector<double>>& rows() const { return rows_; }
  const std::vector<std::pair<std::string, std::string>>& footer() const { return footer_; }

  std::vector<double> column(std::string_view name) const {
    const auto it = std::find(columns_.begin(), columns_.end(), name);
    if (it == columns_.end()) throw Error(ErrorCode::InvalidArgument, "no column " + std::string(name));
    const auto idx = static_cast<std::size_t>(it - columns_.begin());
    std::vector<double> out;
    out.reserve(rows_.size());
    for (const auto& r : rows_) out.push_back(r[idx]);
    return out;
  }

  /// `# key=value` header, one CSV header row, data rows, `# key=value` footer.
  std::string to_csv() const {
    std::ostringstream os;
    for (const auto& [k, v] : metadata_) os << "# " << k << "=" << v << "\n";
    for (std::size_t k = 0; k < columns_.size(); ++k) os << (k ? "," : "") << columns_[k];
    os << "\n";
    for (const auto& row : rows_) {
      for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << detail::format_number(row[k]);
      os << "\n";
    }
    for (const auto& [k, v] : footer_) os << "# " << k << "=" << v << "\n";
    return os.str();
  }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<double>> rows_;
  std::vector<std::pair<std::string, std::string>> metadata_;
  std::vector<std::pair<std::string, std::string>> footer_;
};

namespace detail {

inline std::string scenario_hash(const ScenarioFile& s) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : emit_scenario(s)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

inline void stamp(ResultTable& table, const ResolvedScenario& rs, std::string_view command, std::size_t nodes) {
  table.add_metadata("command", std::string(command));
  table.add_metadata("scenario_hash", scenario_hash(rs.spec));
  table.add_metadata("engine", std::string(kEngineVersion));
  table.add_metadata("nodes", std::to_string(nodes));
  table.add_metadata("seed", std::to_string(rs.seed));
}

template <typename Fn>
auto at_point(std::string_view variable, double value, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), "at " + std::string(variable) + "=" + format_number(value) + ": " + e.what(), e.magnitude());
  }
}

inline const SweepSpec& require_sweep(const ResolvedScenario& rs) {
  if (!rs.spec.sweep) throw Error(ErrorCode::ValidationError, "this command needs a 'sweep' block");
  return *rs.spec.sweep;
}

// Kernel of the scenario's kind with the swept parameter substituted.
inline TimeKernel kernel_at(const ResolvedScenario& rs, SweepVariable variable, double value) {
  const KernelSpec& k = rs.spec.kernel;
  if (variable == SweepVariable::Lambda) {
    if (k.kind != KernelKind::Gaussian) {
      throw Error(ErrorCode::ValidationError, "a lambda sweep needs a gaussian kernel");
    }
    return make_gaussian_kernel(value, k.t_b.value_or(0.0));
  }
  switch (k.kind) {
    case KernelKind::Delta: return make_delta_kernel(value);
    case KernelKind::Gaussian: return make_gaussian_kernel(*k.lambda, value);
    case KernelKind::Uniform: return make_uniform_kernel(*k.half_width, value);
    case KernelKind::Tabulated: break;
  }
  throw Error(ErrorCode::ValidationError, "tabulated kernels hold absolute times and cannot be swept in t_B");
}

}  // namespace detail

/// Alice's and Bob's expectations, purities and energy-basis coherences at
/// each sweep point. Bob's state comes from the closed-form dephasing engine.
inline ResultTable run_decoherence_sweep(const ResolvedScenario& rs, const RunOptions& opt = {}) {
  const SweepSpec& sweep = detail::require_sweep(rs);
  if (sweep.variable == SweepVariable::ActualTime) {
    throw Error(ErrorCode::ValidationError, "decoherence sweeps run over t_B or lambda, not t_A");
  }
  const std::vector<double> gaps = energy_gaps(rs.hamiltonian);
  std::vector<std::string> columns{std::string(variable_name(sweep.variable)),
                                   "N_A",
                                   "N_B",
                                   "purity_A",
                                   "purity_B",
                                   "max_offdiag_A",
                                   "max_offdiag_B",
                                   "complete_decoherence"};
  for (std::size_t g = 0; g < gaps.size(); ++g) columns.push_back("dephasing_gap" + std::to_string(g));
  ResultTable table(std::move(columns));
  detail::stamp(table, rs, "sweep", 0);
  std::string gap_list;
  for (double g : gaps) gap_list += (gap_list.empty() ? "" : ";") + detail::format_number(g);
  table.add_metadata("gaps", gap_list.empty() ? "none" : gap_list);
  table.add_metadata("threshold", detail::format_number(opt.threshold));

  for (double value : sweep.points()) {
    detail::at_point(variable_name(sweep.variable), value, [&] {
      const TimeKernel kernel = detail::kernel_at(rs, sweep.variable, value);
      const double t_b = kernel.watch_reading();
      const DensityMatrix rho_a = evolve_unitary(rs.initial_state, rs.hamiltonian, t_b).state;
      const DensityMatrix rho_b = evolve_relational_dephasing(rs.initial_state, rs.hamiltonian, kernel).state;
      const double offdiag_b = max_offdiag_energy_basis(rho_b, rs.hamiltonian);
      std::vector<double> row{value,
                              expectation(rs.observable, rho_a),
                              expectation(rs.observable, rho_b),
                              purity(rho_a),
                              purity(rho_b),
                              max_offdiag_energy_basis(rho_a, rs.hamiltonian),
                              offdiag_b,
                              offdiag_b < opt.threshold ? 1.0 : 0.0};
      for (double g : gaps) row.push_back(std::abs(characteristic(kernel, g).value));
      table.add_row(std::move(row));
      return 0;
    });
  }
  return table;
}

/// Alice's and Bob's conditional expectations side by side over the pointer
/// times the kernel supports (optionally restricted to the sweep range).
inline ResultTable run_clock_recovery(const ResolvedScenario& rs, const RunOptions& opt = {}) {
  (void)opt;
  if (!rs.clock) throw Error(ErrorCode::ValidationError, "clock-recovery needs a 'clock' block");
  const CompositeScenario sc(rs.hamiltonian, rs.initial_state, *rs.clock);
  const TimeKernel& kernel = rs.kernel;
  require_on_grid(sc.clock(), kernel);

  std::map<std::size_t, double> support;
  if (kernel.kind() == KernelKind::Delta) {
    support[sc.clock().pointer_index(kernel.watch_reading())] = 1.0;
  } else {
    for (const auto& [t, w] : kernel.table()) support[sc.clock().pointer_index(t)] += w;
  }

  ResultTable table({"t", "alice_value", "bob_value", "abs_difference"});
  detail::stamp(table, rs, "clock-recovery", kernel.kind() == KernelKind::Tabulated ? kernel.table().size() : 1);
  table.add_metadata("clock", std::to_string(sc.clock().dim()) + "x" + detail::format_number(sc.clock().tick()));

  const DensityMatrix rho_q = bob_composite_state(sc, kernel);
  double worst = 0.0;
  for (const auto& [m, weight] : support) {
    if (!(weight > 0.0)) continue;
    const double t = sc.clock().pointer_time(m);
    if (rs.spec.sweep && rs.spec.sweep->variable != SweepVariable::Lambda) {
      const double lo = std::min(rs.spec.sweep->start, rs.spec.sweep->stop);
      const double hi = std::max(rs.spec.sweep->start, rs.spec.sweep->stop);
      if (t < lo - kPointerTolerance || t > hi + kPointerTolerance) continue;
    }
    detail::at_point("t", t, [&] {
      const double alice = alice_conditional(sc, rs.observable, t);
      const double bob = conditional_on_reading(sc, rho_q, rs.observable, t);
      worst = std::max(worst, std::abs(alice - bob));
      table.add_row({t, alice, bob, std::abs(alice - bob)});
      return 0;
    });
  }
  table.add_footer("max_abs_difference", detail::format_number(worst));
  return table;
}

/// Collapse-model state against the relational Gaussian state at each time.
inline ResultTable run_pearle_compare(const ResolvedScenario& rs, const RunOptions& opt = {}) {
  if (rs.spec.kernel.kind != KernelKind::Gaussian) {
    throw Error(ErrorCode::ValidationError, "pearle-compare needs a gaussian kernel");
  }
  const double lambda0 = *rs.spec.kernel.lambda;
  const double t0 = rs.spec.kernel.t_b.value_or(0.0);
  SweepVariable variable = SweepVariable::WatchReading;
  std::vector<double> points{t0};
  if (rs.spec.sweep) {
    variable = rs.spec.sweep->variable;
    points = rs.spec.sweep->points();
  }
  const bool sweep_lambda = variable == SweepVariable::Lambda;

  ResultTable table({sweep_lambda ? "lambda" : "t", "maxnorm_distance", "offdiag_pearle", "offdiag_relational"});
  detail::stamp(table, rs, "pearle-compare", opt.nodes);

  double worst = 0.0;
  std::size_t nodes_used = 0;  // the requested count is a floor
  for (double value : points) {
    detail::at_point(variable_name(variable), value, [&] {
      const double lambda = sweep_lambda ? value : lambda0;
      const double t = sweep_lambda ? t0 : value;
      const EvolutionResult pearle = evolve_pearle(rs.initial_state, rs.hamiltonian, lambda, t, opt.nodes);
      nodes_used = std::max(nodes_used, pearle.node_count);
      const DensityMatrix& collapse = pearle.state;
      const DensityMatrix relational =
          evolve_relational_dephasing(rs.initial_state, rs.hamiltonian, make_gaussian_kernel(lambda, t)).state;
      const double distance = max_norm(collapse.matrix() - relational.matrix());
      worst = std::max(worst, distance);
      table.add_row({value, distance, max_offdiag_energy_basis(collapse, rs.hamiltonian),
                     max_offdiag_energy_basis(relational, rs.hamiltonian)});
      return 0;
    });
  }
  table.add_footer("max_distance", detail::format_number(worst));
  table.add_footer("max_nodes_used", std::to_string(nodes_used));
  return table;
}

/// Energy-basis coherence report at the scenario's kernel.
inline ResultTable run_report(const ResolvedScenario& rs, const RunOptions& opt = {}) {
  const CoherenceReport report = coherence_report(rs.initial_state, rs.hamiltonian, rs.kernel, opt.threshold);
  ResultTable table({"i", "j", "E_i", "E_j", "magnitude_A", "magnitude_B", "distinct_energy"});
  detail::stamp(table, rs, "report", 0);
  table.add_metadata("threshold", detail::format_number(opt.threshold));
  for (const auto& p : report.pairs) {
    table.add_row({static_cast<double>(p.i), static_cast<double>(p.j), p.energy_i, p.energy_j, p.magnitude_a,
                   p.magnitude_b, p.distinct_energy ? 1.0 : 0.0});
  }
  table.add_footer("max_offdiag_B", detail::format_number(report.max_offdiag_b));
  table.add_footer("complete_decoherence", report.complete_decoherence ? "true" : "false");
  return table;
}

}  // namespace reltime
