#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "jointida/graph.hpp"
#include "jointida/types.hpp"

namespace jointida {

/// n x p observations; column j holds node j + 1.
using DataMatrix = Eigen::MatrixXd;

/// Symmetric matrix whose rows and columns are labelled by node indices.
class CovMatrix {
 public:
  CovMatrix() = default;
  CovMatrix(std::vector<Node> labels, Eigen::MatrixXd values) : labels_(std::move(labels)), values_(std::move(values)) {
    const auto q = static_cast<Eigen::Index>(labels_.size());
    if (values_.rows() != q || values_.cols() != q)
      throw InvalidInput("covariance", "matrix size does not match the number of labels");
    std::vector<Node> sorted = labels_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw InvalidInput("covariance", "duplicate labels");
    const double scale = std::max(1.0, values_.cwiseAbs().maxCoeff());
    if (!values_.allFinite()) throw NumericalError("covariance", "non-finite entries");
    if ((values_ - values_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw InvalidInput("covariance", "matrix is not symmetric");
    values_ = 0.5 * (values_ + values_.transpose()).eval();
  }

  /// Labels 1..p in order.
  static CovMatrix with_default_labels(Eigen::MatrixXd values) {
    std::vector<Node> labels(values.rows());
    std::iota(labels.begin(), labels.end(), 1);
    return CovMatrix(std::move(labels), std::move(values));
  }

  const std::vector<Node>& labels() const { return labels_; }
  const Eigen::MatrixXd& values() const { return values_; }
  Eigen::Index size() const { return values_.rows(); }

  bool has(Node v) const { return std::find(labels_.begin(), labels_.end(), v) != labels_.end(); }
  Eigen::Index index_of(Node v) const {
    auto it = std::find(labels_.begin(), labels_.end(), v);
    if (it == labels_.end()) throw InvalidInput("covariance", "no variable labelled " + std::to_string(v));
    return it - labels_.begin();
  }
  double operator()(Node i, Node j) const { return values_(index_of(i), index_of(j)); }

  /// Sub-matrix for the given labels, in the given order.
  CovMatrix restricted(const std::vector<Node>& labels) const {
    std::vector<Eigen::Index> idx;
    idx.reserve(labels.size());
    for (Node v : labels) idx.push_back(index_of(v));
    return CovMatrix(labels, values_(idx, idx));
  }

  bool is_positive_definite() const {
    if (size() == 0) return true;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(values_, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    const double largest = ev.maxCoeff();
    return largest > 0 && ev.minCoeff() > static_cast<double>(size()) * std::numeric_limits<double>::epsilon() * largest;
  }
  void require_positive_definite(const std::string& stage) const {
    if (!is_positive_definite()) throw NumericalError(stage, "covariance matrix is not positive definite", labels_);
  }

 private:
  std::vector<Node> labels_;
  Eigen::MatrixXd values_;
};

enum class ErrorFamily { gaussian, uniform, student_t };

inline std::string to_string(ErrorFamily f) {
  switch (f) {
    case ErrorFamily::gaussian: return "gaussian";
    case ErrorFamily::uniform: return "uniform";
    case ErrorFamily::student_t: return "t";
  }
  return "?";
}

/// Mean-zero error law with the given variance. Student-t errors are scaled
/// to the requested variance and need df > 4 for finite fourth moments.
struct ErrorSpec {
  ErrorFamily family = ErrorFamily::gaussian;
  double variance = 1.0;
  double df = 0.0;

  void validate() const {
    if (!(variance > 0) || !std::isfinite(variance)) throw InvalidInput("sem", "error variance must be positive");
    if (family == ErrorFamily::student_t && !(df > 4)) throw InvalidInput("sem", "t errors need df > 4");
  }
};

class LinearSem {
 public:
  LinearSem() = default;
  LinearSem(WeightedDag graph, std::vector<ErrorSpec> errors) : graph_(std::move(graph)), errors_(std::move(errors)) {
    if (static_cast<int>(errors_.size()) != graph_.num_nodes())
      throw InvalidInput("sem", "need exactly one error specification per node");
    for (const auto& e : errors_) e.validate();
  }
  /// Standard Gaussian errors on every node.
  explicit LinearSem(WeightedDag graph)
      : LinearSem(graph, std::vector<ErrorSpec>(static_cast<std::size_t>(graph.num_nodes()))) {}

  int num_nodes() const { return graph_.num_nodes(); }
  const WeightedDag& graph() const { return graph_; }
  const std::vector<ErrorSpec>& errors() const { return errors_; }
  Eigen::VectorXd error_variances() const {
    Eigen::VectorXd v(num_nodes());
    for (int j = 0; j < num_nodes(); ++j) v(j) = errors_[j].variance;
    return v;
  }

 private:
  WeightedDag graph_;
  std::vector<ErrorSpec> errors_;
};

namespace detail {

// (I - B^T)^{-1} diag(omega) (I - B^T)^{-T}, solved as a unit lower
// triangular system after permuting into the causal order `order`.
inline Eigen::MatrixXd sem_covariance(const Eigen::MatrixXd& B, const Eigen::VectorXd& omega,
                                      const std::vector<Node>& order) {
  const Eigen::Index p = B.rows();
  std::vector<Eigen::Index> perm(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) perm[k] = order[k] - 1;
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(p, p) - B(perm, perm).transpose();
  Eigen::MatrixXd inv = m.triangularView<Eigen::UnitLower>().solve(Eigen::MatrixXd::Identity(p, p));
  Eigen::MatrixXd ordered = inv * omega(perm).asDiagonal() * inv.transpose();
  Eigen::MatrixXd out(p, p);
  for (Eigen::Index a = 0; a < p; ++a)
    for (Eigen::Index b = 0; b < p; ++b) out(perm[a], perm[b]) = ordered(a, b);
  return 0.5 * (out + out.transpose());
}

}  // namespace detail

/// Population covariance of the SEM, labelled 1..p.
inline CovMatrix true_covariance(const LinearSem& sem) {
  return CovMatrix::with_default_labels(detail::sem_covariance(sem.graph().weights(), sem.error_variances(),
                                                               topological_order(sem.graph().dag())));
}

/// Covariance of the SEM after deleting all edges into `targets`.
inline CovMatrix intervened_covariance(const LinearSem& sem, const std::vector<Node>& targets) {
  Eigen::MatrixXd B = sem.graph().weights();
  for (Node t : targets) {
    sem.graph().dag().as_pdag().check_node(t);
    B.col(t - 1).setZero();
  }
  return CovMatrix::with_default_labels(
      detail::sem_covariance(B, sem.error_variances(), topological_order(sem.graph().dag())));
}

namespace detail {

inline void check_targets(int p, const std::vector<Node>& targets, Node response, const std::string& stage) {
  std::vector<Node> sorted = targets;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.empty()) throw InvalidInput(stage, "at least one target is required");
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw InvalidInput(stage, "targets must be distinct");
  for (Node t : targets)
    if (t < 1 || t > p) throw InvalidInput(stage, "target " + std::to_string(t) + " out of range");
  if (response < 1 || response > p) throw InvalidInput(stage, "response " + std::to_string(response) + " out of range");
  if (std::binary_search(sorted.begin(), sorted.end(), response))
    throw InvalidInput(stage, "response must not be a target");
}

}  // namespace detail

/// Total joint effect of `targets` on `response` by summing weight products
/// over directed paths that avoid the other targets. Computed by dynamic
/// programming over a causal order.
inline std::vector<double> path_effect(const WeightedDag& g, const std::vector<Node>& targets, Node response) {
  detail::check_targets(g.num_nodes(), targets, response, "path effect");
  const auto order = topological_order(g.dag());
  const NodeSet held = make_node_set(targets);
  std::vector<double> out;
  out.reserve(targets.size());
  for (Node source : targets) {
    // reach[v]: summed weight products of directed paths source ~> v that
    // do not pass through any other target.
    std::vector<double> reach(g.num_nodes() + 1, 0.0);
    reach[source] = 1.0;
    bool started = false;
    for (Node v : order) {
      if (v == source) {
        started = true;
        continue;
      }
      if (!started || contains(held, v)) continue;
      double total = 0.0;
      for (Node u : g.parents(v))
        if (reach[u] != 0.0) total += reach[u] * g.weight(u, v);
      reach[v] = total;
    }
    out.push_back(reach[response]);
  }
  return out;
}

namespace detail {

inline double draw_error(const ErrorSpec& spec, std::mt19937_64& rng) {
  switch (spec.family) {
    case ErrorFamily::gaussian: {
      std::normal_distribution<double> d(0.0, std::sqrt(spec.variance));
      return d(rng);
    }
    case ErrorFamily::uniform: {
      const double half = std::sqrt(3.0 * spec.variance);
      std::uniform_real_distribution<double> d(-half, half);
      return d(rng);
    }
    case ErrorFamily::student_t: {
      std::student_t_distribution<double> d(spec.df);
      return d(rng) * std::sqrt(spec.variance * (spec.df - 2.0) / spec.df);
    }
  }
  return 0.0;
}

}  // namespace detail

/// n i.i.d. draws from the SEM; deterministic for a given seed.
inline DataMatrix sample(const LinearSem& sem, Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw InvalidInput("sample", "sample size must be at least 1");
  const int p = sem.num_nodes();
  const auto order = topological_order(sem.graph().dag());
  std::vector<NodeSet> pa(p + 1);
  for (Node v = 1; v <= p; ++v) pa[v] = sem.graph().parents(v);
  const Eigen::MatrixXd& B = sem.graph().weights();
  std::mt19937_64 rng(seed);
  DataMatrix data(n, p);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Node v : order) {
      double x = detail::draw_error(sem.errors()[v - 1], rng);
      for (Node u : pa[v]) x += B(u - 1, v - 1) * data(r, u - 1);
      data(r, v - 1) = x;
    }
  }
  return data;
}

/// Rescales a SEM so every variable has unit marginal variance. Effects of
/// the rescaled SEM are the standardized effects of the original.
inline LinearSem standardize(const LinearSem& sem) {
  const Eigen::VectorXd sd = true_covariance(sem).values().diagonal().cwiseSqrt();
  std::vector<WeightedEdge> edges = sem.graph().weighted_edges();
  for (auto& e : edges) e.weight *= sd(e.from - 1) / sd(e.to - 1);
  std::vector<ErrorSpec> errors = sem.errors();
  for (int j = 0; j < sem.num_nodes(); ++j) errors[j].variance /= sd(j) * sd(j);
  return LinearSem(WeightedDag(sem.num_nodes(), edges), errors);
}

// Nonparanormal transforms.

enum class TransformKind { identity, cubic, exp, logistic, piecewise_linear };

/// Strictly increasing scalar map. The piecewise-linear form passes through
/// the origin; `knots` are its sorted breakpoints and `slopes` (one more than
/// the knots, all positive) the slopes of the consecutive pieces.
struct Transform {
  TransformKind kind = TransformKind::identity;
  std::vector<double> knots;
  std::vector<double> slopes;

  void validate() const {
    if (kind != TransformKind::piecewise_linear) return;
    if (slopes.size() != knots.size() + 1) throw InvalidInput("npn", "piecewise-linear transform needs knots+1 slopes");
    if (!std::is_sorted(knots.begin(), knots.end()) || std::adjacent_find(knots.begin(), knots.end()) != knots.end())
      throw InvalidInput("npn", "knots must be strictly increasing");
    for (double s : slopes)
      if (!(s > 0)) throw InvalidInput("npn", "slopes must be positive");
  }

  double operator()(double z) const {
    switch (kind) {
      case TransformKind::identity: return z;
      case TransformKind::cubic: return z * z * z;
      case TransformKind::exp: return std::exp(z);
      case TransformKind::logistic: return 1.0 / (1.0 + std::exp(-z));
      case TransformKind::piecewise_linear: return piecewise(z);
    }
    return z;
  }

 private:
  double piecewise(double z) const {
    // Integral of the slope function from 0 to z.
    auto slope_at = [&](double x) {
      std::size_t k = static_cast<std::size_t>(std::upper_bound(knots.begin(), knots.end(), x) - knots.begin());
      return slopes[k];
    };
    std::vector<double> points{0.0};
    for (double k : knots)
      if ((z > 0 && k > 0 && k < z) || (z < 0 && k < 0 && k > z)) points.push_back(k);
    points.push_back(z);
    std::sort(points.begin(), points.end());
    double total = 0.0;
    for (std::size_t a = 0; a + 1 < points.size(); ++a)
      total += slope_at(0.5 * (points[a] + points[a + 1])) * (points[a + 1] - points[a]);
    return z >= 0 ? total : -total;
  }
};

inline std::string to_string(TransformKind k) {
  switch (k) {
    case TransformKind::identity: return "identity";
    case TransformKind::cubic: return "cubic";
    case TransformKind::exp: return "exp";
    case TransformKind::logistic: return "logistic";
    case TransformKind::piecewise_linear: return "pwl";
  }
  return "?";
}

/// Nonparanormal model: Gaussian SEM with unit marginal variances (so its
/// covariance is the correlation matrix of Z) and one transform per node.
class NpnModel {
 public:
  NpnModel(LinearSem base, std::vector<Transform> transforms) : base_(std::move(base)), transforms_(std::move(transforms)) {
    if (static_cast<int>(transforms_.size()) != base_.num_nodes())
      throw InvalidInput("npn", "need exactly one transform per node");
    for (const auto& t : transforms_) t.validate();
    for (const auto& e : base_.errors())
      if (e.family != ErrorFamily::gaussian) throw InvalidInput("npn", "base SEM must have Gaussian errors");
    const Eigen::VectorXd diag = true_covariance(base_).values().diagonal();
    if ((diag.array() - 1.0).abs().maxCoeff() > 1e-9) throw InvalidInput("npn", "base SEM must have unit marginal variances");
  }

  const LinearSem& base() const { return base_; }
  const std::vector<Transform>& transforms() const { return transforms_; }
  /// Correlation matrix of the latent Gaussian vector.
  CovMatrix latent_correlation() const { return true_covariance(base_); }

 private:
  LinearSem base_;
  std::vector<Transform> transforms_;
};

inline DataMatrix npn_sample(const NpnModel& m, Eigen::Index n, std::uint64_t seed) {
  DataMatrix data = sample(m.base(), n, seed);
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    const Transform& g = m.transforms()[j];
    data.col(j) = data.col(j).unaryExpr([&g](double z) { return g(z); });
  }
  return data;
}

// Random graph generation for simulations.

/// Erdos-Renyi DAG over a random causal order: each ordered pair is joined
/// with probability expected_degree / (p - 1); weights are uniform on
/// +-[min_weight, max_weight].
inline WeightedDag random_weighted_dag(int p, double expected_degree, std::mt19937_64& rng, double min_weight = 0.1,
                                       double max_weight = 1.0) {
  if (p < 1) throw InvalidInput("random dag", "p must be positive");
  std::vector<Node> perm(p);
  std::iota(perm.begin(), perm.end(), 1);
  std::shuffle(perm.begin(), perm.end(), rng);
  const double prob = p > 1 ? std::min(1.0, expected_degree / (p - 1)) : 0.0;
  std::bernoulli_distribution edge(prob);
  std::uniform_real_distribution<double> magnitude(min_weight, max_weight);
  std::bernoulli_distribution negative(0.5);
  std::vector<WeightedEdge> edges;
  for (int a = 0; a < p; ++a)
    for (int b = a + 1; b < p; ++b)
      if (edge(rng)) {
        const double w = magnitude(rng);
        edges.push_back({perm[a], perm[b], negative(rng) ? -w : w});
      }
  return WeightedDag(p, edges);
}

inline LinearSem random_linear_sem(int p, double expected_degree, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return LinearSem(random_weighted_dag(p, expected_degree, rng));
}

}  // namespace jointida
