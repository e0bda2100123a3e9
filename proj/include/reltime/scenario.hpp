#pragma once

// Scenario description files.
//
// A scenario is a nested-block plain-text document. Lines hold
// `key value...`; a trailing `{` opens a block, a lone `}` closes it, and `#`
// starts a comment. Units follow hbar = 1, so energies are inverse times.
//
//   system {
//     dimension 2
//     spectrum 0 1                   # or: hamiltonian { real {..} imag {..} }
//                                    # or: hamiltonian random [scale]
//     state plus_state               # basis_state k | maximally_mixed |
//                                    # random_pure | state { real {..} imag {..} }
//   }
//   kernel {
//     kind gaussian                  # delta | gaussian | uniform | tabulated
//     lambda 0.1
//     t_B 2
//     half_width 1                   # uniform only
//     table { 0 0.5 \n 1 0.5 }       # tabulated: inline rows or table_file <path>
//   }
//   clock { dim 8 tick 0.5 }         # optional, one key per line
//   observable { preset pauli_x }    # pauli_x | pauli_z | number_op | matrix {..}
//   sweep { variable t_B start 0 stop 10 steps 21 }   # optional, one key per line
//
// Inside a `real` or `imag` block each line is one matrix row.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "reltime/clock.hpp"
#include "reltime/kernels.hpp"
#include "reltime/qmat.hpp"

namespace reltime {

struct Diagnostic {
  std::size_t line = 0;  // 0 when the problem is not tied to one line
  std::string field;
  std::string message;

  std::string str() const {
    std::string out = line ? "line " + std::to_string(line) + ": " : std::string();
    if (!field.empty()) out += field + ": ";
    return out + message;
  }
};

/// Parse or validation failure carrying every diagnostic found.
class ScenarioError : public Error {
 public:
  ScenarioError(ErrorCode code, std::vector<Diagnostic> diagnostics)
      : Error(code, join(diagnostics)), diagnostics_(std::move(diagnostics)) {}

  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  static std::string join(const std::vector<Diagnostic>& ds) {
    std::string out;
    for (const auto& d : ds) {
      if (!out.empty()) out += "\n";
      out += d.str();
    }
    return out;
  }
  std::vector<Diagnostic> diagnostics_;
};

struct MatrixSpec {
  std::vector<std::vector<double>> real;
  std::vector<std::vector<double>> imag;  // empty means purely real
};

struct HamiltonianSpec {
  enum class Form { Spectrum, Matrix, Random } form = Form::Spectrum;
  std::vector<double> spectrum;
  MatrixSpec matrix;
  double scale = 1.0;
};

struct StateSpec {
  enum class Form { PlusState, BasisState, MaximallyMixed, RandomPure, Matrix } form = Form::PlusState;
  std::size_t index = 0;
  MatrixSpec matrix;
};

struct KernelSpec {
  KernelKind kind = KernelKind::Gaussian;
  std::optional<double> lambda;
  std::optional<double> t_b;
  std::optional<double> half_width;
  std::vector<std::pair<double, double>> table;
  std::string table_file;  // kept verbatim; resolved against the scenario directory
};

struct ClockSpec {
  std::size_t dim = 0;
  double tick = 0.0;
};

struct ObservableSpec {
  enum class Form { PauliX, PauliZ, NumberOp, Matrix } form = Form::PauliZ;
  MatrixSpec matrix;
};

enum class SweepVariable { WatchReading, ActualTime, Lambda };

inline std::string_view variable_name(SweepVariable v) {
  switch (v) {
    case SweepVariable::WatchReading: return "t_B";
    case SweepVariable::ActualTime: return "t_A";
    case SweepVariable::Lambda: return "lambda";
  }
  return "?";
}

struct SweepSpec {
  SweepVariable variable = SweepVariable::WatchReading;
  double start = 0.0;
  double stop = 0.0;
  std::size_t steps = 1;

  std::vector<double> points() const {
    std::vector<double> out(steps);
    for (std::size_t k = 0; k < steps; ++k) {
      out[k] = steps == 1 ? start
                          : start + (stop - start) * static_cast<double>(k) / static_cast<double>(steps - 1);
    }
    return out;
  }
};

struct ScenarioFile {
  std::size_t dimension = 0;
  HamiltonianSpec hamiltonian;
  StateSpec state;
  KernelSpec kernel;
  std::optional<ClockSpec> clock;
  ObservableSpec observable;
  std::optional<SweepSpec> sweep;
  std::filesystem::path base_dir;  // for table_file lookups
};

/// Numerical objects built from a ScenarioFile.
struct ResolvedScenario {
  ScenarioFile spec;
  std::uint64_t seed = 0;
  Hamiltonian hamiltonian;
  DensityMatrix initial_state;
  Observable observable;
  TimeKernel kernel;  // as written; sweeps substitute the swept parameter
  std::optional<ClockSystem> clock;
};

namespace detail {

inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// "unknown X 'y'; did you mean 'z'? (expected one of: ...)"
inline std::string unknown_choice(std::string_view what, std::string_view got,
                                  const std::vector<std::string_view>& choices) {
  std::string out = "unknown " + std::string(what) + " '" + std::string(got) + "'";
  std::string_view best;
  std::size_t best_d = 3;  // only suggest near misses
  for (auto c : choices) {
    if (auto d = edit_distance(got, c); d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (!best.empty()) out += "; did you mean '" + std::string(best) + "'?";
  out += " (expected one of:";
  for (std::size_t k = 0; k < choices.size(); ++k) out += (k ? ", " : " ") + std::string(choices[k]);
  return out + ")";
}

struct Node {
  std::string key;
  std::vector<std::string> args;
  std::vector<Node> children;
  bool is_block = false;
  std::size_t line = 0;
};

inline std::vector<Node> tokenize_tree(std::string_view text, std::vector<Diagnostic>& errors) {
  std::vector<Node> root;
  std::vector<std::vector<Node>*> stack{&root};
  std::vector<Node*> open;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tokens;
    for (std::string tok; ls >> tok;) tokens.push_back(tok);
    if (tokens.empty()) continue;

    if (tokens.size() == 1 && tokens[0] == "}") {
      if (open.empty()) {
        errors.push_back({line_no, "", "unmatched '}'"});
      } else {
        open.pop_back();
        stack.pop_back();
      }
      continue;
    }
    if (std::find(tokens.begin(), tokens.end(), "}") != tokens.end() ||
        std::find(tokens.begin(), tokens.end() - 1, "{") != tokens.end() - 1) {
      errors.push_back({line_no, tokens[0], "braces must end a line ('{') or stand alone ('}')"});
      continue;
    }
    Node node;
    node.line = line_no;
    node.key = tokens[0];
    node.is_block = tokens.back() == "{";
    const auto arg_end = node.is_block ? tokens.end() - 1 : tokens.end();
    if (node.is_block && tokens.size() == 1) {
      errors.push_back({line_no, "", "block needs a name before '{'"});
      continue;
    }
    node.args.assign(tokens.begin() + 1, arg_end);
    stack.back()->push_back(std::move(node));
    if (stack.back()->back().is_block) {
      open.push_back(&stack.back()->back());
      stack.push_back(&open.back()->children);
    }
  }
  for (const Node* n : open) errors.push_back({n->line, n->key, "block is never closed"});
  return root;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<std::size_t> parse_size(std::string_view s) {
  std::size_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

class Reader {
 public:
  explicit Reader(std::vector<Diagnostic>& errors) : errors_(errors) {}

  void error(const Node& n, std::string msg) { errors_.push_back({n.line, n.key, std::move(msg)}); }

  std::optional<double> number(const Node& n) {
    if (n.is_block || n.args.size() != 1) {
      error(n, "expected exactly one number");
      return std::nullopt;
    }
    auto v = parse_double(n.args[0]);
    if (!v) error(n, "'" + n.args[0] + "' is not a number");
    return v;
  }

  std::optional<std::size_t> count(const Node& n) {
    if (n.is_block || n.args.size() != 1) {
      error(n, "expected exactly one non-negative integer");
      return std::nullopt;
    }
    auto v = parse_size(n.args[0]);
    if (!v) error(n, "'" + n.args[0] + "' is not a non-negative integer");
    return v;
  }

  std::vector<double> numbers(const Node& n, const std::vector<std::string>& tokens) {
    std::vector<double> out;
    for (const auto& t : tokens) {
      if (auto v = parse_double(t)) {
        out.push_back(*v);
      } else {
        error(n, "'" + t + "' is not a number");
      }
    }
    return out;
  }

  std::vector<std::vector<double>> rows(const Node& block) {
    std::vector<std::vector<double>> out;
    for (const auto& row : block.children) {
      if (row.is_block) {
        error(row, "unexpected block inside matrix rows");
        continue;
      }
      std::vector<std::string> tokens{row.key};
      tokens.insert(tokens.end(), row.args.begin(), row.args.end());
      out.push_back(numbers(row, tokens));
    }
    return out;
  }

  MatrixSpec matrix(const Node& block) {
    MatrixSpec m;
    bool have_real = false;
    for (const auto& c : block.children) {
      if (c.key == "real" && c.is_block) {
        m.real = rows(c);
        have_real = true;
      } else if (c.key == "imag" && c.is_block) {
        m.imag = rows(c);
      } else {
        error(c, "expected 'real {' or 'imag {' inside " + block.key);
      }
    }
    if (!have_real) error(block, "matrix block needs a 'real { ... }' part");
    return m;
  }

 private:
  std::vector<Diagnostic>& errors_;
};

inline void read_system(const Node& block, ScenarioFile& s, Reader& r, std::vector<Diagnostic>& errors) {
  bool have_dim = false, have_h = false, have_state = false;
  for (const auto& n : block.children) {
    if (n.key == "dimension") {
      if (auto v = r.count(n)) s.dimension = *v;
      have_dim = true;
    } else if (n.key == "spectrum" && !n.is_block) {
      s.hamiltonian.form = HamiltonianSpec::Form::Spectrum;
      s.hamiltonian.spectrum = r.numbers(n, n.args);
      if (n.args.empty()) r.error(n, "spectrum needs at least one energy");
      have_h = true;
    } else if (n.key == "hamiltonian" && n.is_block) {
      s.hamiltonian.form = HamiltonianSpec::Form::Matrix;
      s.hamiltonian.matrix = r.matrix(n);
      have_h = true;
    } else if (n.key == "hamiltonian" && !n.args.empty() && n.args[0] == "random") {
      s.hamiltonian.form = HamiltonianSpec::Form::Random;
      if (n.args.size() > 2) r.error(n, "usage: hamiltonian random [scale]");
      if (n.args.size() == 2) {
        if (auto v = parse_double(n.args[1])) {
          s.hamiltonian.scale = *v;
        } else {
          r.error(n, "'" + n.args[1] + "' is not a number");
        }
      }
      have_h = true;
    } else if (n.key == "hamiltonian") {
      r.error(n, "expected 'hamiltonian {' block or 'hamiltonian random [scale]'");
      have_h = true;
    } else if (n.key == "state" && n.is_block) {
      s.state.form = StateSpec::Form::Matrix;
      s.state.matrix = r.matrix(n);
      have_state = true;
    } else if (n.key == "state") {
      have_state = true;
      static const std::vector<std::string_view> presets{"plus_state", "basis_state", "maximally_mixed",
                                                         "random_pure"};
      const std::string preset = n.args.empty() ? "" : n.args[0];
      if (preset == "plus_state" && n.args.size() == 1) {
        s.state.form = StateSpec::Form::PlusState;
      } else if (preset == "maximally_mixed" && n.args.size() == 1) {
        s.state.form = StateSpec::Form::MaximallyMixed;
      } else if (preset == "random_pure" && n.args.size() == 1) {
        s.state.form = StateSpec::Form::RandomPure;
      } else if (preset == "basis_state") {
        s.state.form = StateSpec::Form::BasisState;
        std::optional<std::size_t> k = n.args.size() == 2 ? parse_size(n.args[1]) : std::nullopt;
        if (!k) {
          r.error(n, "usage: state basis_state <k>");
        } else {
          s.state.index = *k;
        }
      } else if (std::find(presets.begin(), presets.end(), preset) != presets.end()) {
        r.error(n, "preset '" + preset + "' takes no arguments");
      } else {
        r.error(n, unknown_choice("state preset", preset, presets));
      }
    } else {
      r.error(n, unknown_choice("system key", n.key, {"dimension", "spectrum", "hamiltonian", "state"}));
    }
  }
  if (!have_dim) errors.push_back({block.line, "system", "missing 'dimension'"});
  if (!have_h) errors.push_back({block.line, "system", "missing 'spectrum' or 'hamiltonian'"});
  if (!have_state) errors.push_back({block.line, "system", "missing 'state'"});
}

inline void read_kernel(const Node& block, ScenarioFile& s, Reader& r, std::vector<Diagnostic>& errors) {
  bool have_kind = false;
  for (const auto& n : block.children) {
    if (n.key == "kind") {
      have_kind = true;
      static const std::vector<std::string_view> kinds{"delta", "gaussian", "uniform", "tabulated"};
      const std::string k = n.args.size() == 1 ? n.args[0] : "";
      if (k == "delta") {
        s.kernel.kind = KernelKind::Delta;
      } else if (k == "gaussian") {
        s.kernel.kind = KernelKind::Gaussian;
      } else if (k == "uniform") {
        s.kernel.kind = KernelKind::Uniform;
      } else if (k == "tabulated") {
        s.kernel.kind = KernelKind::Tabulated;
      } else {
        r.error(n, unknown_choice("kernel kind", k, kinds));
      }
    } else if (n.key == "lambda") {
      s.kernel.lambda = r.number(n);
    } else if (n.key == "t_B") {
      s.kernel.t_b = r.number(n);
    } else if (n.key == "half_width") {
      s.kernel.half_width = r.number(n);
    } else if (n.key == "table" && n.is_block) {
      for (const auto& row : r.rows(n)) {
        if (row.size() != 2) {
          errors.push_back({n.line, "table", "each row needs exactly `t weight`"});
          continue;
        }
        s.kernel.table.emplace_back(row[0], row[1]);
      }
    } else if (n.key == "table_file" && n.args.size() == 1) {
      s.kernel.table_file = n.args[0];
    } else {
      r.error(n, unknown_choice("kernel key", n.key, {"kind", "lambda", "t_B", "half_width", "table", "table_file"}));
    }
  }
  if (!have_kind) errors.push_back({block.line, "kernel", "missing 'kind'"});
}

inline void read_clock(const Node& block, ScenarioFile& s, Reader& r, std::vector<Diagnostic>& errors) {
  ClockSpec c;
  bool have_dim = false, have_tick = false;
  for (const auto& n : block.children) {
    if (n.key == "dim") {
      if (auto v = r.count(n)) c.dim = *v;
      have_dim = true;
    } else if (n.key == "tick") {
      if (auto v = r.number(n)) c.tick = *v;
      have_tick = true;
    } else {
      r.error(n, unknown_choice("clock key", n.key, {"dim", "tick"}));
    }
  }
  if (!have_dim) errors.push_back({block.line, "clock", "missing 'dim'"});
  if (!have_tick) errors.push_back({block.line, "clock", "missing 'tick'"});
  s.clock = c;
}

inline void read_observable(const Node& block, ScenarioFile& s, Reader& r, std::vector<Diagnostic>& errors) {
  bool have = false;
  for (const auto& n : block.children) {
    if (n.key == "preset") {
      have = true;
      static const std::vector<std::string_view> presets{"pauli_x", "pauli_z", "number_op"};
      const std::string p = n.args.size() == 1 ? n.args[0] : "";
      if (p == "pauli_x") {
        s.observable.form = ObservableSpec::Form::PauliX;
      } else if (p == "pauli_z") {
        s.observable.form = ObservableSpec::Form::PauliZ;
      } else if (p == "number_op") {
        s.observable.form = ObservableSpec::Form::NumberOp;
      } else {
        r.error(n, unknown_choice("observable preset", p, presets));
      }
    } else if (n.key == "matrix" && n.is_block) {
      have = true;
      s.observable.form = ObservableSpec::Form::Matrix;
      s.observable.matrix = r.matrix(n);
    } else {
      r.error(n, unknown_choice("observable key", n.key, {"preset", "matrix"}));
    }
  }
  if (!have) errors.push_back({block.line, "observable", "missing 'preset' or 'matrix'"});
}

inline void read_sweep(const Node& block, ScenarioFile& s, Reader& r, std::vector<Diagnostic>& errors) {
  SweepSpec sw;
  bool have_var = false, have_start = false, have_stop = false, have_steps = false;
  for (const auto& n : block.children) {
    if (n.key == "variable") {
      have_var = true;
      const std::string v = n.args.size() == 1 ? n.args[0] : "";
      if (v == "t_B") {
        sw.variable = SweepVariable::WatchReading;
      } else if (v == "t_A") {
        sw.variable = SweepVariable::ActualTime;
      } else if (v == "lambda") {
        sw.variable = SweepVariable::Lambda;
      } else {
        r.error(n, unknown_choice("sweep variable", v, {"t_B", "t_A", "lambda"}));
      }
    } else if (n.key == "start") {
      if (auto v = r.number(n)) sw.start = *v;
      have_start = true;
    } else if (n.key == "stop") {
      if (auto v = r.number(n)) sw.stop = *v;
      have_stop = true;
    } else if (n.key == "steps") {
      if (auto v = r.count(n)) sw.steps = *v;
      have_steps = true;
    } else {
      r.error(n, unknown_choice("sweep key", n.key, {"variable", "start", "stop", "steps"}));
    }
  }
  if (!have_var) errors.push_back({block.line, "sweep", "missing 'variable'"});
  if (!have_start) errors.push_back({block.line, "sweep", "missing 'start'"});
  if (!have_stop) errors.push_back({block.line, "sweep", "missing 'stop'"});
  if (!have_steps) errors.push_back({block.line, "sweep", "missing 'steps'"});
  s.sweep = sw;
}

inline ComplexMatrix build_matrix(const MatrixSpec& m, std::size_t dim, const std::string& what,
                                  std::vector<Diagnostic>& errors) {
  const auto d = static_cast<Eigen::Index>(dim);
  ComplexMatrix out = ComplexMatrix::Zero(d, d);
  auto fill = [&](const std::vector<std::vector<double>>& rows, bool imag) {
    if (rows.size() != dim) {
      errors.push_back({0, what, std::string(imag ? "imag" : "real") + " part has " + std::to_string(rows.size()) +
                                     " rows, expected " + std::to_string(dim)});
      return false;
    }
    for (std::size_t i = 0; i < dim; ++i) {
      if (rows[i].size() != dim) {
        errors.push_back({0, what, std::string(imag ? "imag" : "real") + " row " + std::to_string(i) + " has " +
                                       std::to_string(rows[i].size()) + " entries, expected " +
                                       std::to_string(dim)});
        return false;
      }
      for (std::size_t j = 0; j < dim; ++j) {
        const auto ii = static_cast<Eigen::Index>(i);
        const auto jj = static_cast<Eigen::Index>(j);
        out(ii, jj) += imag ? complex(0.0, rows[i][j]) : complex(rows[i][j], 0.0);
      }
    }
    return true;
  };
  bool ok = fill(m.real, false);
  if (!m.imag.empty()) ok = fill(m.imag, true) && ok;
  if (!ok) throw ScenarioError(ErrorCode::ValidationError, {});
  return out;
}

}  // namespace detail

/// Gaussian unitary-ensemble sample, scale * (A + A^dagger) / 2.
inline ComplexMatrix random_hermitian(std::size_t dim, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(dim);
  ComplexMatrix a(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) a(i, j) = complex(normal(rng), normal(rng));
  }
  return scale * hermitian_part(a);
}

inline ComplexVector random_amplitudes(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ComplexVector v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = complex(normal(rng), normal(rng));
  return v;
}

inline Observable preset_observable(ObservableSpec::Form form, std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  switch (form) {
    case ObservableSpec::Form::PauliX:
    case ObservableSpec::Form::PauliZ: {
      if (dim != 2) {
        throw Error(ErrorCode::ValidationError, "Pauli presets need dimension 2, scenario has " + std::to_string(dim));
      }
      ComplexMatrix m(2, 2);
      if (form == ObservableSpec::Form::PauliX) {
        m << 0, 1, 1, 0;
      } else {
        m << 1, 0, 0, -1;
      }
      return Observable(m);
    }
    case ObservableSpec::Form::NumberOp: {
      ComplexMatrix m = ComplexMatrix::Zero(d, d);
      for (Eigen::Index k = 0; k < d; ++k) m(k, k) = static_cast<double>(k);
      return Observable(m);
    }
    case ObservableSpec::Form::Matrix:
      break;
  }
  throw Error(ErrorCode::InvalidArgument, "not a preset observable");
}

/// Kernel as written in the scenario, at the scenario's own t_B.
inline TimeKernel build_kernel(const ScenarioFile& s) {
  const KernelSpec& k = s.kernel;
  const double t_b = k.t_b.value_or(0.0);
  switch (k.kind) {
    case KernelKind::Delta: return make_delta_kernel(t_b);
    case KernelKind::Gaussian:
      if (!k.lambda) throw Error(ErrorCode::ValidationError, "gaussian kernel needs 'lambda'");
      return make_gaussian_kernel(*k.lambda, t_b);
    case KernelKind::Uniform:
      if (!k.half_width) throw Error(ErrorCode::ValidationError, "uniform kernel needs 'half_width'");
      return make_uniform_kernel(*k.half_width, t_b);
    case KernelKind::Tabulated: {
      if (!k.table.empty() && !k.table_file.empty()) {
        throw Error(ErrorCode::ValidationError, "tabulated kernel takes either 'table' or 'table_file', not both");
      }
      if (!k.table_file.empty()) {
        std::filesystem::path p(k.table_file);
        if (p.is_relative()) p = s.base_dir / p;
        return load_tabulated_kernel(p.string(), t_b);
      }
      return make_tabulated_kernel(k.table, t_b);
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown kernel kind");
}

/// Build every numerical object; collects all failures before throwing.
inline ResolvedScenario resolve(const ScenarioFile& s, std::uint64_t seed = 0) {
  std::vector<Diagnostic> errors;
  std::mt19937_64 rng(seed);
  const std::size_t dim = s.dimension;
  if (dim == 0) errors.push_back({0, "system.dimension", "must be positive"});

  auto guard = [&](const std::string& field, auto&& fn) {
    try {
      return std::optional(fn());
    } catch (const ScenarioError& e) {
      errors.insert(errors.end(), e.diagnostics().begin(), e.diagnostics().end());
    } catch (const Error& e) {
      errors.push_back({0, field, std::string(code_name(e.code())) + ": " + e.what()});
    }
    return std::optional<std::decay_t<decltype(fn())>>();
  };

  std::optional<Hamiltonian> h;
  std::optional<DensityMatrix> rho0;
  std::optional<Observable> n;
  if (dim > 0) {
    h = guard("system.hamiltonian", [&] {
      switch (s.hamiltonian.form) {
        case HamiltonianSpec::Form::Spectrum:
          if (s.hamiltonian.spectrum.size() != dim) {
            throw Error(ErrorCode::ValidationError, "spectrum has " + std::to_string(s.hamiltonian.spectrum.size()) +
                                                        " energies, dimension is " + std::to_string(dim));
          }
          return diagonal_hamiltonian(s.hamiltonian.spectrum);
        case HamiltonianSpec::Form::Matrix:
          return spectral_decompose(detail::build_matrix(s.hamiltonian.matrix, dim, "system.hamiltonian", errors));
        case HamiltonianSpec::Form::Random:
          if (!(s.hamiltonian.scale > 0.0)) throw Error(ErrorCode::ValidationError, "random scale must be > 0");
          return spectral_decompose(random_hermitian(dim, rng, s.hamiltonian.scale));
      }
      throw Error(ErrorCode::InvalidArgument, "unknown Hamiltonian form");
    });
    rho0 = guard("system.state", [&] {
      switch (s.state.form) {
        case StateSpec::Form::PlusState:
          return pure_state(ComplexVector::Ones(static_cast<Eigen::Index>(dim)));
        case StateSpec::Form::BasisState: return basis_state(dim, s.state.index);
        case StateSpec::Form::MaximallyMixed: return maximally_mixed(dim);
        case StateSpec::Form::RandomPure: return pure_state(random_amplitudes(dim, rng));
        case StateSpec::Form::Matrix:
          return make_density(detail::build_matrix(s.state.matrix, dim, "system.state", errors));
      }
      throw Error(ErrorCode::InvalidArgument, "unknown state form");
    });
    n = guard("observable", [&] {
      if (s.observable.form == ObservableSpec::Form::Matrix) {
        return Observable(detail::build_matrix(s.observable.matrix, dim, "observable", errors));
      }
      return preset_observable(s.observable.form, dim);
    });
  }
  auto kernel = guard("kernel", [&] { return build_kernel(s); });
  std::optional<ClockSystem> clock;
  if (s.clock) {
    clock = guard("clock", [&] { return make_ideal_clock(s.clock->dim, s.clock->tick); });
  }
  if (s.sweep && s.sweep->steps == 0) errors.push_back({0, "sweep.steps", "must be at least 1"});

  if (!errors.empty()) throw ScenarioError(ErrorCode::ValidationError, std::move(errors));
  return ResolvedScenario{s, seed, std::move(*h), std::move(*rho0), std::move(*n), std::move(*kernel),
                          std::move(clock)};
}

/// Parse and validate. Every syntax problem is reported at once as a
/// ParseError; if the syntax is clean, every semantic problem as a
/// ValidationError.
inline ScenarioFile parse_scenario(std::string_view text, const std::filesystem::path& base_dir = {}) {
  std::vector<Diagnostic> errors;
  const auto tree = detail::tokenize_tree(text, errors);
  detail::Reader r(errors);
  ScenarioFile s;
  s.base_dir = base_dir;
  std::map<std::string, int> seen;
  for (const auto& n : tree) {
    if (!n.is_block) {
      r.error(n, "expected a top-level block");
      continue;
    }
    if (++seen[n.key] > 1) r.error(n, "duplicate block");
    if (n.key == "system") {
      detail::read_system(n, s, r, errors);
    } else if (n.key == "kernel") {
      detail::read_kernel(n, s, r, errors);
    } else if (n.key == "clock") {
      detail::read_clock(n, s, r, errors);
    } else if (n.key == "observable") {
      detail::read_observable(n, s, r, errors);
    } else if (n.key == "sweep") {
      detail::read_sweep(n, s, r, errors);
    } else {
      r.error(n, detail::unknown_choice("block", n.key, {"system", "kernel", "clock", "observable", "sweep"}));
    }
  }
  for (const char* required : {"system", "kernel", "observable"}) {
    if (!seen.count(required)) errors.push_back({0, required, "missing required block"});
  }
  if (!errors.empty()) throw ScenarioError(ErrorCode::ParseError, std::move(errors));
  resolve(s);
  return s;
}

inline ScenarioFile load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open scenario " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.parent_path());
}

/// Canonical text form; parse_scenario(emit_scenario(s)) reproduces s.
inline std::string emit_scenario(const ScenarioFile& s) {
  using detail::format_number;
  std::ostringstream os;
  auto emit_rows = [&](const std::vector<std::vector<double>>& rows, const char* indent) {
    for (const auto& row : rows) {
      os << indent;
      for (std::size_t j = 0; j < row.size(); ++j) os << (j ? " " : "") << format_number(row[j]);
      os << "\n";
    }
  };
  auto emit_matrix = [&](const MatrixSpec& m, const char* indent, const char* inner) {
    os << indent << "real {\n";
    emit_rows(m.real, inner);
    os << indent << "}\n";
    if (!m.imag.empty()) {
      os << indent << "imag {\n";
      emit_rows(m.imag, inner);
      os << indent << "}\n";
    }
  };

  os << "system {\n  dimension " << s.dimension << "\n";
  switch (s.hamiltonian.form) {
    case HamiltonianSpec::Form::Spectrum:
      os << "  spectrum";
      for (double e : s.hamiltonian.spectrum) os << " " << format_number(e);
      os << "\n";
      break;
    case HamiltonianSpec::Form::Matrix:
      os << "  hamiltonian {\n";
      emit_matrix(s.hamiltonian.matrix, "    ", "      ");
      os << "  }\n";
      break;
    case HamiltonianSpec::Form::Random:
      os << "  hamiltonian random " << format_number(s.hamiltonian.scale) << "\n";
      break;
  }
  switch (s.state.form) {
    case StateSpec::Form::PlusState: os << "  state plus_state\n"; break;
    case StateSpec::Form::BasisState: os << "  state basis_state " << s.state.index << "\n"; break;
    case StateSpec::Form::MaximallyMixed: os << "  state maximally_mixed\n"; break;
    case StateSpec::Form::RandomPure: os << "  state random_pure\n"; break;
    case StateSpec::Form::Matrix:
      os << "  state {\n";
      emit_matrix(s.state.matrix, "    ", "      ");
      os << "  }\n";
      break;
  }
  os << "}\n";

  os << "kernel {\n  kind " << kind_name(s.kernel.kind) << "\n";
  if (s.kernel.lambda) os << "  lambda " << format_number(*s.kernel.lambda) << "\n";
  if (s.kernel.t_b) os << "  t_B " << format_number(*s.kernel.t_b) << "\n";
  if (s.kernel.half_width) os << "  half_width " << format_number(*s.kernel.half_width) << "\n";
  if (!s.kernel.table.empty()) {
    os << "  table {\n";
    for (const auto& [t, w] : s.kernel.table) os << "    " << format_number(t) << " " << format_number(w) << "\n";
    os << "  }\n";
  }
  if (!s.kernel.table_file.empty()) os << "  table_file " << s.kernel.table_file << "\n";
  os << "}\n";

  if (s.clock) os << "clock {\n  dim " << s.clock->dim << "\n  tick " << format_number(s.clock->tick) << "\n}\n";

  os << "observable {\n";
  switch (s.observable.form) {
    case ObservableSpec::Form::PauliX: os << "  preset pauli_x\n"; break;
    case ObservableSpec::Form::PauliZ: os << "  preset pauli_z\n"; break;
    case ObservableSpec::Form::NumberOp: os << "  preset number_op\n"; break;
    case ObservableSpec::Form::Matrix:
      os << "  matrix {\n";
      emit_matrix(s.observable.matrix, "    ", "      ");
      os << "  }\n";
      break;
  }
  os << "}\n";

  if (s.sweep) {
    os << "sweep {\n  variable " << variable_name(s.sweep->variable) << "\n  start " << format_number(s.sweep->start)
       << "\n  stop " << format_number(s.sweep->stop) << "\n  steps " << s.sweep->steps << "\n}\n";
  }
  return os.str();
}

}  // namespace reltime
