#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "jointida/sem.hpp"
#include "jointida/types.hpp"

namespace jointida {

/// Parent sets of the intervention nodes, one per target, in target order.
struct ParentAssignment {
  std::vector<Node> targets;
  std::vector<NodeSet> parent_sets;

  ParentAssignment() = default;
  ParentAssignment(std::vector<Node> t, std::vector<NodeSet> pa) : targets(std::move(t)), parent_sets(std::move(pa)) {
    for (auto& s : parent_sets) s = make_node_set(s);
    validate();
  }

  std::size_t size() const { return targets.size(); }

  void validate() const {
    if (parent_sets.size() != targets.size()) throw InvalidInput("parent assignment", "one parent set per target is required");
    for (std::size_t k = 0; k < targets.size(); ++k)
      if (contains(parent_sets[k], targets[k]))
        throw InvalidInput("parent assignment", "target " + std::to_string(targets[k]) + " listed as its own parent");
  }

  /// All labels touched: targets plus every parent.
  NodeSet involved() const {
    NodeSet out = make_node_set(targets);
    for (const auto& s : parent_sets) out = set_union(out, s);
    return out;
  }

  bool operator==(const ParentAssignment&) const = default;
};

/// Total joint effect of `targets` on `response`.
struct EffectVector {
  std::vector<Node> targets;
  Node response = 0;
  std::vector<double> values;
};

enum class Method { rrc, mcd };

inline std::string to_string(Method m) { return m == Method::rrc ? "rrc" : "mcd"; }

inline Method parse_method(const std::string& s) {
  if (s == "rrc") return Method::rrc;
  if (s == "mcd") return Method::mcd;
  throw InvalidInput("config", "unknown method '" + s + "' (expected rrc or mcd)");
}

/// Pivots below this fraction of the largest diagonal entry are treated as
/// rank deficiency.
inline constexpr double kPivotTolerance = 1e-10;

/// Coefficient of X_i in the regression of X_p on {X_i} and `pa`, or 0 when
/// p is itself in `pa`. Works on population or sample covariances alike.
inline double adjusted_effect(const CovMatrix& cov, Node i, Node p, const NodeSet& pa_in) {
  const NodeSet pa = make_node_set(pa_in);
  if (i == p) throw InvalidInput("adjusted effect", "intervention and response coincide");
  if (contains(pa, i)) throw InvalidInput("adjusted effect", "node " + std::to_string(i) + " is in its own adjustment set");
  if (contains(pa, p)) return 0.0;
  std::vector<Eigen::Index> pred{cov.index_of(i)};
  for (Node v : pa) pred.push_back(cov.index_of(v));
  const Eigen::Index resp = cov.index_of(p);
  const Eigen::MatrixXd a = cov.values()(pred, pred);
  Eigen::VectorXd b(static_cast<Eigen::Index>(pred.size()));
  for (std::size_t k = 0; k < pred.size(); ++k) b(static_cast<Eigen::Index>(k)) = cov.values()(pred[k], resp);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  const Eigen::VectorXd d = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || d.minCoeff() <= kPivotTolerance * a.diagonal().maxCoeff()) {
    std::vector<Node> nodes{i};
    nodes.insert(nodes.end(), pa.begin(), pa.end());
    throw NumericalError("adjusted effect", "singular covariance block", nodes);
  }
  return ldlt.solve(b)(0);
}

/// Joint effect by recursive regressions: single-intervention effects are
/// adjusted regressions, higher orders follow
///   theta_i^[S] = theta_i^[S\j] - theta_ij^[S\j] * theta_j^[S\i],
/// with j the last other target (in the given order) of S.
inline EffectVector rrc_effect(const CovMatrix& cov, const ParentAssignment& pa, Node response) {
  pa.validate();
  const std::size_t k = pa.size();
  if (k == 0 || k > 30) throw InvalidInput("rrc", "number of targets must be between 1 and 30");
  for (Node t : pa.targets)
    if (t == response) throw InvalidInput("rrc", "response must not be a target");

  std::map<std::tuple<std::uint32_t, std::size_t, Node>, double> memo;
  // Effect of target pos `i` on `endpoint` in a joint intervention on the
  // target positions in `mask`.
  auto theta = [&](auto&& self, std::uint32_t mask, std::size_t i, Node endpoint) -> double {
    if (contains(pa.parent_sets[i], endpoint)) return 0.0;
    const auto key = std::make_tuple(mask, i, endpoint);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    double value;
    if (mask == (1u << i)) {
      value = adjusted_effect(cov, pa.targets[i], endpoint, pa.parent_sets[i]);
    } else {
      std::size_t j = 0;
      for (std::size_t pos = 0; pos < k; ++pos)
        if (pos != i && (mask & (1u << pos))) j = pos;
      const std::uint32_t without_j = mask & ~(1u << j);
      const std::uint32_t without_i = mask & ~(1u << i);
      value = self(self, without_j, i, endpoint) -
              self(self, without_j, i, pa.targets[j]) * self(self, without_i, j, endpoint);
    }
    memo.emplace(key, value);
    return value;
  };

  const std::uint32_t all = (1u << k) - 1u;
  EffectVector out{pa.targets, response, {}};
  for (std::size_t i = 0; i < k; ++i) out.values.push_back(theta(theta, all, i, response));
  return out;
}

/// L * Sigma * L^T = D for Sigma reordered by `ordering`; L unit lower
/// triangular, D positive diagonal. Row j of L holds the negated regression
/// coefficients of variable j on its predecessors.
struct CholeskyFactors {
  std::vector<Node> ordering;
  Eigen::MatrixXd L;
  Eigen::VectorXd D;
};

inline CholeskyFactors generalized_cholesky(const CovMatrix& cov, const std::vector<Node>& ordering) {
  if (static_cast<Eigen::Index>(ordering.size()) != cov.size())
    throw InvalidInput("cholesky", "ordering must be a permutation of the covariance labels");
  const CovMatrix s = cov.restricted(ordering);
  const Eigen::Index q = s.size();
  const Eigen::MatrixXd& a = s.values();
  const double max_diag = q > 0 ? a.diagonal().maxCoeff() : 0.0;
  // Unpivoted LDL^T: Sigma = M D M^T with M unit lower triangular.
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(q, q);
  Eigen::VectorXd d(q);
  for (Eigen::Index j = 0; j < q; ++j) {
    double dj = a(j, j);
    for (Eigen::Index c = 0; c < j; ++c) dj -= m(j, c) * m(j, c) * d(c);
    if (!(dj > kPivotTolerance * max_diag))
      throw NumericalError("cholesky", "non-positive pivot", {ordering[static_cast<std::size_t>(j)]});
    d(j) = dj;
    for (Eigen::Index r = j + 1; r < q; ++r) {
      double v = a(r, j);
      for (Eigen::Index c = 0; c < j; ++c) v -= m(r, c) * m(j, c) * d(c);
      m(r, j) = v / dj;
    }
  }
  Eigen::MatrixXd l = m.triangularView<Eigen::UnitLower>().solve(Eigen::MatrixXd::Identity(q, q));
  return {ordering, std::move(l), std::move(d)};
}

namespace detail {

// One modification step: order as (parents, node, rest), factor, replace the
// node's row of L by the unit vector minus `new_weights` on its parent
// columns, and recompose. The result keeps cov's label order.
inline CovMatrix modify_mechanism(const CovMatrix& cov, Node node, const NodeSet& parents,
                                  const std::map<Node, double>& new_weights, const std::string& stage) {
  if (!cov.has(node)) throw InvalidInput(stage, "covariance has no variable " + std::to_string(node));
  for (Node v : parents)
    if (!cov.has(v)) throw InvalidInput(stage, "covariance has no variable for parent " + std::to_string(v));
  std::vector<Node> ordering(parents.begin(), parents.end());
  ordering.push_back(node);
  std::vector<Node> rest;
  for (Node v : cov.labels())
    if (v != node && !contains(parents, v)) rest.push_back(v);
  std::sort(rest.begin(), rest.end());
  ordering.insert(ordering.end(), rest.begin(), rest.end());

  CholeskyFactors f = [&] {
    try {
      return generalized_cholesky(cov, ordering);
    } catch (const NumericalError& e) {
      throw NumericalError(stage, e.what(), e.nodes());
    }
  }();
  const auto row = static_cast<Eigen::Index>(parents.size());
  for (Eigen::Index c = 0; c < row; ++c) {
    auto it = new_weights.find(ordering[static_cast<std::size_t>(c)]);
    f.L(row, c) = it == new_weights.end() ? 0.0 : -it->second;
  }
  const Eigen::Index q = cov.size();
  Eigen::MatrixXd linv = f.L.triangularView<Eigen::UnitLower>().solve(Eigen::MatrixXd::Identity(q, q));
  Eigen::MatrixXd ordered = linv * f.D.asDiagonal() * linv.transpose();

  Eigen::MatrixXd out(q, q);
  std::vector<Eigen::Index> pos(ordering.size());
  for (std::size_t k = 0; k < ordering.size(); ++k) pos[k] = cov.index_of(ordering[k]);
  for (Eigen::Index a = 0; a < q; ++a)
    for (Eigen::Index b = 0; b < q; ++b) out(pos[a], pos[b]) = ordered(a, b);
  return CovMatrix(cov.labels(), 0.5 * (out + out.transpose()));
}

}  // namespace detail

/// Post-intervention covariance by successive modified Cholesky
/// decompositions, one per target in the assignment's order. Within-block
/// orderings are ascending by label.
inline CovMatrix mcd_sigma_k(const CovMatrix& cov, const ParentAssignment& pa) {
  pa.validate();
  CovMatrix current = cov;
  for (std::size_t j = 0; j < pa.size(); ++j)
    current = detail::modify_mechanism(current, pa.targets[j], pa.parent_sets[j], {}, "mcd");
  return current;
}

/// Joint effect from the modified covariance of U = targets, their parents
/// and the response: Sigma^[k]_{ip} / Sigma^[k]_{ii}, zeroed when the
/// response is a parent of target i.
inline EffectVector mcd_effect(const CovMatrix& cov, const ParentAssignment& pa, Node response) {
  pa.validate();
  for (Node t : pa.targets)
    if (t == response) throw InvalidInput("mcd", "response must not be a target");
  NodeSet u = pa.involved();
  u = set_union(u, {response});
  const CovMatrix sigma = mcd_sigma_k(cov.restricted(u), pa);
  EffectVector out{pa.targets, response, {}};
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const Node t = pa.targets[i];
    out.values.push_back(contains(pa.parent_sets[i], response) ? 0.0 : sigma(t, response) / sigma(t, t));
  }
  return out;
}

inline EffectVector opin_effect(Method method, const CovMatrix& cov, const ParentAssignment& pa, Node response) {
  return method == Method::rrc ? rrc_effect(cov, pa, response) : mcd_effect(cov, pa, response);
}

/// Covariance after replacing the structural weights of `node` on its
/// parents `old_pa` by `new_weights` (missing parents get weight 0). An
/// empty map is the do-intervention on `node`.
inline CovMatrix mechanism_change_covariance(const CovMatrix& cov, Node node, const NodeSet& old_pa_in,
                                             const std::map<Node, double>& new_weights) {
  const NodeSet old_pa = make_node_set(old_pa_in);
  if (contains(old_pa, node)) throw InvalidInput("mechanism change", "node listed as its own parent");
  for (const auto& [parent, w] : new_weights)
    if (!contains(old_pa, parent))
      throw InvalidInput("mechanism change", "new weight for " + std::to_string(parent) + " which is not a parent");
  return detail::modify_mechanism(cov, node, old_pa, new_weights, "mechanism change");
}

}  // namespace jointida
