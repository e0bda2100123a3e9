#pragma once

// Clock-uncertainty kernels P(t | t_B): the density of the actual time t
// given a watch reading t_B, plus the quadrature rules used to integrate
// against them and their characteristic functions
//
//   chi(omega) = \int dt P(t | t_B) e^{-i omega t}.
//
// Only the Gaussian kind has width sqrt(lambda t_B) growing with the reading.
// Uniform and Tabulated are extensions for user-supplied watch models.
//
// The Gaussian kernel puts weight on negative actual times when t_B is small
// compared with lambda. No truncation is applied: unitary evolution is
// defined for t < 0, and the density integrates over the whole real line.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "reltime/errors.hpp"

namespace reltime {

enum class KernelKind { Delta, Gaussian, Uniform, Tabulated };

inline std::string_view kind_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::Delta: return "delta";
    case KernelKind::Gaussian: return "gaussian";
    case KernelKind::Uniform: return "uniform";
    case KernelKind::Tabulated: return "tabulated";
  }
  return "unknown";
}

inline constexpr std::size_t kDefaultNodes = 64;

/// Discrete rule sum_k w_k f(t_k) standing in for \int dt P(t|t_B) f(t).
class QuadratureRule {
 public:
  QuadratureRule(std::vector<double> nodes, std::vector<double> weights)
      : nodes_(std::move(nodes)), weights_(std::move(weights)) {
    if (nodes_.empty() || nodes_.size() != weights_.size()) {
      throw Error(ErrorCode::InvalidArgument, "quadrature rule needs matching non-empty node and weight lists");
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      if (!std::isfinite(nodes_[k]) || !std::isfinite(weights_[k])) {
        throw Error(ErrorCode::NonFinite, "quadrature rule has non-finite entries");
      }
      if (weights_[k] < 0.0) {
        throw Error(ErrorCode::NegativeWeight, "quadrature weight is negative", weights_[k]);
      }
      sum += weights_[k];
    }
    if (std::abs(sum - 1.0) > 1e-8) {
      throw Error(ErrorCode::InvalidArgument, "quadrature weights sum to " + std::to_string(sum), sum - 1.0);
    }
  }

  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

struct HermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;  // for the weight function e^{-x^2}; sum to sqrt(pi)
};

namespace detail {

inline HermiteRule golub_welsch(std::size_t n) {
  const auto m = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index k = 1; k < m; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k) / 2.0);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::EigensolverFailure, "Gauss-Hermite eigensolver did not converge");
  }
  HermiteRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double sqrt_pi = std::sqrt(std::numbers::pi);
  for (Eigen::Index k = 0; k < m; ++k) {
    const double v0 = solver.eigenvectors()(0, k);
    rule.nodes[static_cast<std::size_t>(k)] = solver.eigenvalues()(k);
    rule.weights[static_cast<std::size_t>(k)] = sqrt_pi * v0 * v0;
  }
  // Symmetrize: the exact rule is even, the solver's output is only nearly so.
  for (std::size_t k = 0; k < n / 2; ++k) {
    const std::size_t r = n - 1 - k;
    const double x = 0.5 * (rule.nodes[r] - rule.nodes[k]);
    const double w = 0.5 * (rule.weights[r] + rule.weights[k]);
    rule.nodes[k] = -x;
    rule.nodes[r] = x;
    rule.weights[k] = rule.weights[r] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

}  // namespace detail

/// Gauss-Hermite nodes and weights via Golub-Welsch (eigenvalues of the
/// symmetric Jacobi matrix of the physicists' Hermite recurrence). Rules are
/// cached per node count.
inline HermiteRule gauss_hermite(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "Gauss-Hermite rule needs at least one node");
  static std::mutex guard;
  static std::map<std::size_t, HermiteRule> cache;
  std::lock_guard<std::mutex> lock(guard);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, detail::golub_welsch(n)).first;
  return it->second;
}

struct CharacteristicValue {
  double omega = 0.0;
  std::complex<double> value{1.0, 0.0};
};

/// Probability density of the actual time given a watch reading.
class TimeKernel {
 public:
  KernelKind kind() const { return kind_; }
  double watch_reading() const { return t_b_; }
  double lambda() const { return lambda_; }
  double half_width() const { return half_width_; }
  const std::vector<std::pair<double, double>>& table() const { return table_; }

  /// Standard deviation of the Gaussian kind, sqrt(lambda t_B).
  double gaussian_width() const { return std::sqrt(lambda_ * t_b_); }

  double mean() const {
    if (kind_ == KernelKind::Tabulated) {
      double m = 0.0;
      for (const auto& [t, w] : table_) m += t * w;
      return m;
    }
    return t_b_;
  }

  double variance() const {
    switch (kind_) {
      case KernelKind::Delta: return 0.0;
      case KernelKind::Gaussian: return lambda_ * t_b_;
      case KernelKind::Uniform: return half_width_ * half_width_ / 3.0;
      case KernelKind::Tabulated: {
        const double mu = mean();
        double v = 0.0;
        for (const auto& [t, w] : table_) v += (t - mu) * (t - mu) * w;
        return v;
      }
    }
    return 0.0;
  }

  /// Pointwise density for the continuous kinds; point-mass kinds report 0.
  double density(double t) const {
    switch (kind_) {
      case KernelKind::Gaussian: {
        const double var = lambda_ * t_b_;
        return std::exp(-(t_b_ - t) * (t_b_ - t) / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
      }
      case KernelKind::Uniform:
        return std::abs(t - t_b_) <= half_width_ ? 0.5 / half_width_ : 0.0;
      default:
        return 0.0;
    }
  }

  friend TimeKernel make_delta_kernel(double);
  friend TimeKernel make_gaussian_kernel(double, double);
  friend TimeKernel make_uniform_kernel(double, double);
  friend TimeKernel make_tabulated_kernel(std::vector<std::pair<double, double>>, double);

 private:
  TimeKernel() = default;

  KernelKind kind_ = KernelKind::Delta;
  double t_b_ = 0.0;
  double lambda_ = 0.0;
  double half_width_ = 0.0;
  std::vector<std::pair<double, double>> table_;  // (t, normalized weight)
};

inline TimeKernel make_delta_kernel(double t_b) {
  if (!std::isfinite(t_b)) throw Error(ErrorCode::NonFinite, "watch reading must be finite");
  TimeKernel k;
  k.kind_ = KernelKind::Delta;
  k.t_b_ = t_b;
  return k;
}

/// P(t|t_B) = (2 pi lambda t_B)^{-1/2} exp(-(t_B - t)^2 / (2 lambda t_B)).
/// A zero reading has zero width and yields the Delta kernel at 0.
inline TimeKernel make_gaussian_kernel(double lambda, double t_b) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::NonPositiveLambda, "Gaussian kernel needs lambda > 0, got " + std::to_string(lambda),
                lambda);
  }
  if (!(t_b >= 0.0) || !std::isfinite(t_b)) {
    throw Error(ErrorCode::InvalidArgument, "Gaussian kernel needs a watch reading t_B >= 0, got " +
                                                std::to_string(t_b));
  }
  if (t_b == 0.0) return make_delta_kernel(0.0);
  TimeKernel k;
  k.kind_ = KernelKind::Gaussian;
  k.lambda_ = lambda;
  k.t_b_ = t_b;
  return k;
}

inline TimeKernel make_uniform_kernel(double half_width, double t_b) {
  if (!(half_width >= 0.0) || !std::isfinite(half_width) || !std::isfinite(t_b)) {
    throw Error(ErrorCode::InvalidArgument, "uniform kernel needs a finite half-width >= 0");
  }
  if (half_width == 0.0) return make_delta_kernel(t_b);
  TimeKernel k;
  k.kind_ = KernelKind::Uniform;
  k.half_width_ = half_width;
  k.t_b_ = t_b;
  return k;
}

/// Histogram kernel. Weights need not be normalized; negative weights are
/// rejected. Rows with equal times are kept as separate nodes.
inline TimeKernel make_tabulated_kernel(std::vector<std::pair<double, double>> rows, double t_b = 0.0) {
  if (rows.empty()) throw Error(ErrorCode::EmptyTable, "tabulated kernel has no rows");
  double total = 0.0;
  for (const auto& [t, w] : rows) {
    if (!std::isfinite(t) || !std::isfinite(w)) throw Error(ErrorCode::NonFinite, "tabulated kernel row not finite");
    if (w < 0.0) throw Error(ErrorCode::NegativeWeight, "tabulated kernel weight is negative", w);
    total += w;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::EmptyTable, "tabulated kernel weights sum to zero");
  for (auto& row : rows) row.second /= total;
  TimeKernel k;
  k.kind_ = KernelKind::Tabulated;
  k.t_b_ = t_b;
  k.table_ = std::move(rows);
  return k;
}

/// Two-column `t weight` text, whitespace separated, `#` starts a comment.
inline std::vector<std::pair<double, double>> read_kernel_table(std::istream& in) {
  std::vector<std::pair<double, double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string a, b, extra;
    if (!(fields >> a)) continue;
    if (!(fields >> b) || (fields >> extra)) {
      throw Error(ErrorCode::ParseError, "kernel table line " + std::to_string(line_no) + ": expected `t weight`");
    }
    try {
      std::size_t pa = 0, pb = 0;
      const double t = std::stod(a, &pa);
      const double w = std::stod(b, &pb);
      if (pa != a.size() || pb != b.size()) throw std::invalid_argument("trailing characters");
      rows.emplace_back(t, w);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError, "kernel table line " + std::to_string(line_no) + ": not a number");
    }
  }
  return rows;
}

inline TimeKernel load_tabulated_kernel(const std::string& path, double t_b = 0.0) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open kernel table " + path);
  return make_tabulated_kernel(read_kernel_table(in), t_b);
}

/// Discretize the kernel. `node_count` is ignored for Delta and Tabulated.
inline QuadratureRule quadrature_for(const TimeKernel& kernel, std::size_t node_count = kDefaultNodes) {
  if (node_count == 0) throw Error(ErrorCode::InvalidArgument, "quadrature needs at least one node");
  switch (kernel.kind()) {
    case KernelKind::Delta:
      return QuadratureRule({kernel.watch_reading()}, {1.0});

    case KernelKind::Gaussian: {
      // t = t_B + sqrt(2 lambda t_B) x maps e^{-x^2} onto the kernel.
      const HermiteRule gh = gauss_hermite(node_count);
      const double scale = std::sqrt(2.0 * kernel.lambda() * kernel.watch_reading());
      double total = 0.0;
      for (double w : gh.weights) total += w;
      std::vector<double> nodes(node_count), weights(node_count);
      for (std::size_t k = 0; k < node_count; ++k) {
        nodes[k] = kernel.watch_reading() + scale * gh.nodes[k];
        weights[k] = gh.weights[k] / total;
      }
      return QuadratureRule(std::move(nodes), std::move(weights));
    }

    case KernelKind::Uniform: {
      if (node_count == 1) return QuadratureRule({kernel.watch_reading()}, {1.0});
      const double lo = kernel.watch_reading() - kernel.half_width();
      const double step = 2.0 * kernel.half_width() / static_cast<double>(node_count - 1);
      std::vector<double> nodes(node_count), weights(node_count);
      const double inner = 1.0 / static_cast<double>(node_count - 1);
      for (std::size_t k = 0; k < node_count; ++k) {
        nodes[k] = lo + step * static_cast<double>(k);
        weights[k] = (k == 0 || k + 1 == node_count) ? 0.5 * inner : inner;
      }
      // Symmetric about t_B so odd moments cancel exactly.
      for (std::size_t k = 0; k < node_count / 2; ++k) {
        const std::size_t r = node_count - 1 - k;
        const double offset = 0.5 * (nodes[r] - nodes[k]);
        nodes[k] = kernel.watch_reading() - offset;
        nodes[r] = kernel.watch_reading() + offset;
      }
      if (node_count % 2 == 1) nodes[node_count / 2] = kernel.watch_reading();
      return QuadratureRule(std::move(nodes), std::move(weights));
    }

    case KernelKind::Tabulated: {
      std::vector<double> nodes, weights;
      nodes.reserve(kernel.table().size());
      weights.reserve(kernel.table().size());
      for (const auto& [t, w] : kernel.table()) {
        nodes.push_back(t);
        weights.push_back(w);
      }
      return QuadratureRule(std::move(nodes), std::move(weights));
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown kernel kind");
}

inline double sinc(double x) {
  if (std::abs(x) < 1e-8) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

/// Closed-form chi(omega) where one exists; the table sum for Tabulated.
inline CharacteristicValue characteristic(const TimeKernel& kernel, double omega) {
  using namespace std::complex_literals;
  const std::complex<double> carrier = std::exp(-1i * omega * kernel.watch_reading());
  switch (kernel.kind()) {
    case KernelKind::Delta:
      return {omega, carrier};
    case KernelKind::Gaussian:
      return {omega, carrier * std::exp(-0.5 * kernel.lambda() * kernel.watch_reading() * omega * omega)};
    case KernelKind::Uniform:
      return {omega, carrier * sinc(omega * kernel.half_width())};
    case KernelKind::Tabulated: {
      std::complex<double> sum = 0.0;
      for (const auto& [t, w] : kernel.table()) sum += w * std::exp(-1i * omega * t);
      return {omega, sum};
    }
  }
  return {omega, 1.0};
}

/// chi(omega) evaluated with a quadrature rule instead of the closed form.
inline std::complex<double> characteristic(const QuadratureRule& rule, double omega) {
  using namespace std::complex_literals;
  std::complex<double> sum = 0.0;
  for (std::size_t k = 0; k < rule.node_count(); ++k) sum += rule.weights()[k] * std::exp(-1i * omega * rule.nodes()[k]);
  return sum;
}

}  // namespace reltime
