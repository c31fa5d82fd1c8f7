#pragma once

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "jointida/graph.hpp"
#include "jointida/sem.hpp"
#include "jointida/types.hpp"

namespace jointida {

enum class CiTest { fisher_z };

struct CiTestConfig {
  double alpha = 0.01;
  std::optional<int> max_condition_size;  // unset: p - 2
  CiTest test = CiTest::fisher_z;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("config", "alpha must lie in (0, 1)");
    if (max_condition_size && *max_condition_size < 0) throw InvalidInput("config", "max_condition_size must be >= 0");
  }
};

/// Unbiased sample covariance; columns are labelled 1..p.
inline CovMatrix sample_covariance(const DataMatrix& data) {
  if (data.rows() < 2) throw InvalidInput("covariance", "need at least two observations");
  Eigen::MatrixXd c = data.rowwise() - data.colwise().mean();
  Eigen::MatrixXd s = c.transpose() * c / static_cast<double>(data.rows() - 1);
  for (Eigen::Index j = 0; j < s.rows(); ++j)
    if (!(s(j, j) > 0.0)) throw NumericalError("covariance", "constant column", {static_cast<Node>(j + 1)});
  return CovMatrix::with_default_labels(std::move(s));
}

inline CovMatrix to_correlation(const CovMatrix& cov) {
  const Eigen::VectorXd inv_sd = cov.values().diagonal().cwiseSqrt().cwiseInverse();
  return CovMatrix(cov.labels(), inv_sd.asDiagonal() * cov.values() * inv_sd.asDiagonal());
}

enum class CorrKind { pearson, spearman, kendall };

inline std::string to_string(CorrKind k) {
  switch (k) {
    case CorrKind::pearson: return "pearson";
    case CorrKind::spearman: return "spearman";
    case CorrKind::kendall: return "kendall";
  }
  return "?";
}

inline CorrKind parse_corr_kind(const std::string& s) {
  if (s == "pearson") return CorrKind::pearson;
  if (s == "spearman") return CorrKind::spearman;
  if (s == "kendall") return CorrKind::kendall;
  throw InvalidInput("config", "unknown correlation kind '" + s + "'");
}

/// Fraction of tied observations per column above which rank correlations
/// are refused.
inline constexpr double kMaxTieFraction = 0.05;

struct RankCorrelation {
  CovMatrix corr;
  bool clipped = false;  // nearest positive-definite projection applied
};

namespace detail {

// Average ranks (1-based); also reports the number of observations that
// share their value with another.
inline Eigen::VectorXd average_ranks(const Eigen::VectorXd& x, Eigen::Index& tied) {
  const Eigen::Index n = x.size();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return x(a) < x(b); });
  Eigen::VectorXd r(n);
  tied = 0;
  for (Eigen::Index a = 0; a < n;) {
    Eigen::Index b = a;
    while (b + 1 < n && x(idx[b + 1]) == x(idx[a])) ++b;
    if (b > a) tied += b - a + 1;
    const double avg = 0.5 * static_cast<double>(a + b) + 1.0;
    for (Eigen::Index k = a; k <= b; ++k) r(idx[k]) = avg;
    a = b + 1;
  }
  return r;
}

// Merge sort counting inversions.
inline long long count_inversions(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = (lo + hi) / 2;
  long long inv = count_inversions(v, buf, lo, mid) + count_inversions(v, buf, mid, hi);
  std::size_t a = lo, b = mid, k = lo;
  while (a < mid && b < hi) {
    if (v[b] < v[a]) {
      inv += static_cast<long long>(mid - a);
      buf[k++] = v[b++];
    } else {
      buf[k++] = v[a++];
    }
  }
  while (a < mid) buf[k++] = v[a++];
  while (b < hi) buf[k++] = v[b++];
  std::copy(buf.begin() + static_cast<long>(lo), buf.begin() + static_cast<long>(hi), v.begin() + static_cast<long>(lo));
  return inv;
}

// Sum of t(t-1)/2 over runs of equal values in a sorted range.
template <class It>
long long tied_pairs(It first, It last) {
  long long total = 0;
  for (It a = first; a != last;) {
    It b = a;
    while (b != last && *b == *a) ++b;
    const auto t = static_cast<long long>(b - a);
    total += t * (t - 1) / 2;
    a = b;
  }
  return total;
}

// Kendall's tau-b in O(n log n) (Knight's algorithm).
inline double kendall_tau(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const auto n = static_cast<std::size_t>(x.size());
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x(a) < x(b) || (x(a) == x(b) && y(a) < y(b));
  });
  std::vector<double> xs(n), ys(n);
  for (std::size_t k = 0; k < n; ++k) {
    xs[k] = x(static_cast<Eigen::Index>(idx[k]));
    ys[k] = y(static_cast<Eigen::Index>(idx[k]));
  }
  const long long n0 = static_cast<long long>(n) * (static_cast<long long>(n) - 1) / 2;
  const long long n1 = tied_pairs(xs.begin(), xs.end());
  long long n3 = 0;  // pairs tied in both
  for (std::size_t a = 0; a < n;) {
    std::size_t b = a;
    while (b < n && xs[b] == xs[a]) ++b;
    n3 += tied_pairs(ys.begin() + static_cast<long>(a), ys.begin() + static_cast<long>(b));
    a = b;
  }
  std::vector<double> buf(n);
  const long long swaps = count_inversions(ys, buf, 0, n);
  const long long n2 = tied_pairs(ys.begin(), ys.end());
  const double num = static_cast<double>(n0 - n1 - n2 + n3 - 2 * swaps);
  const double den = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  return den > 0 ? num / den : 0.0;
}

}  // namespace detail

/// Clips eigenvalues at `floor` and rescales back to unit diagonal.
inline Eigen::MatrixXd nearest_positive_definite(const Eigen::MatrixXd& a, double floor, bool& clipped) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  clipped = es.eigenvalues().minCoeff() < floor;
  if (!clipped) return a;
  const Eigen::VectorXd lambda = es.eigenvalues().cwiseMax(floor);
  Eigen::MatrixXd b = es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
  const Eigen::VectorXd inv_sd = b.diagonal().cwiseSqrt().cwiseInverse();
  b = inv_sd.asDiagonal() * b * inv_sd.asDiagonal();
  return 0.5 * (b + b.transpose());
}

/// Sine-transformed Spearman or Kendall correlation matrix.
inline RankCorrelation rank_correlation_matrix(const DataMatrix& data, CorrKind kind) {
  if (kind == CorrKind::pearson) throw InvalidInput("rank correlation", "kind must be spearman or kendall");
  const Eigen::Index n = data.rows(), p = data.cols();
  if (n < 3) throw InvalidInput("rank correlation", "need at least three observations");
  Eigen::MatrixXd ranks(n, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::Index tied = 0;
    ranks.col(j) = detail::average_ranks(data.col(j), tied);
    if (static_cast<double>(tied) > kMaxTieFraction * static_cast<double>(n))
      throw InvalidInput("rank correlation", "too many ties in column " + std::to_string(j + 1) + " for continuous data");
  }
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(p, p);
  if (kind == CorrKind::spearman) {
    Eigen::MatrixXd c = ranks.rowwise() - ranks.colwise().mean();
    Eigen::MatrixXd s = c.transpose() * c;
    const Eigen::VectorXd inv_sd = s.diagonal().cwiseSqrt().cwiseInverse();
    s = inv_sd.asDiagonal() * s * inv_sd.asDiagonal();
    for (Eigen::Index a = 0; a < p; ++a)
      for (Eigen::Index b = a + 1; b < p; ++b) r(a, b) = r(b, a) = 2.0 * std::sin(std::numbers::pi / 6.0 * s(a, b));
  } else {
    for (Eigen::Index a = 0; a < p; ++a)
      for (Eigen::Index b = a + 1; b < p; ++b)
        r(a, b) = r(b, a) = std::sin(std::numbers::pi / 2.0 * detail::kendall_tau(data.col(a), data.col(b)));
  }
  bool clipped = false;
  Eigen::MatrixXd pd = nearest_positive_definite(r, 1e-8, clipped);
  return {CovMatrix::with_default_labels(std::move(pd)), clipped};
}

/// Partial correlation of X_i and X_j given X_S from the inverse of the
/// {i, j} u S block.
inline double partial_correlation(const CovMatrix& corr, Node i, Node j, const NodeSet& s) {
  std::vector<Node> block{i, j};
  block.insert(block.end(), s.begin(), s.end());
  const Eigen::MatrixXd a = corr.restricted(block).values();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 1e-12 * a.diagonal().maxCoeff())
    throw NumericalError("ci test", "singular correlation block", block);
  const Eigen::MatrixXd prec = ldlt.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
  return std::clamp(-prec(0, 1) / std::sqrt(prec(0, 0) * prec(1, 1)), -1.0, 1.0);
}

/// Fisher z-test; returns true when independence is accepted.
inline bool fisher_z_ci(const CovMatrix& corr, Eigen::Index n, Node i, Node j, const NodeSet& s_in, double alpha) {
  const NodeSet s = make_node_set(s_in);
  if (i == j) throw InvalidInput("ci test", "i and j must differ");
  if (contains(s, i) || contains(s, j)) throw InvalidInput("ci test", "conditioning set contains i or j");
  if (static_cast<Eigen::Index>(s.size()) > n - 4)
    throw InvalidInput("ci test", "conditioning set too large for n = " + std::to_string(n));
  if (!(alpha > 0 && alpha < 1)) throw InvalidInput("ci test", "alpha must lie in (0, 1)");
  const double rho = partial_correlation(corr, i, j, s);
  if (std::abs(rho) >= 1.0) return false;
  const double stat = std::sqrt(static_cast<double>(n - static_cast<Eigen::Index>(s.size()) - 3)) * std::abs(std::atanh(rho));
  const boost::math::normal_distribution<double> z;
  return stat <= boost::math::quantile(z, 1.0 - alpha / 2.0);
}

namespace detail {

// Calls f on each size-k subset of `pool` in lexicographic order until f
// returns true; reports whether it did.
template <class F>
bool any_subset(const NodeSet& pool, std::size_t k, F&& f) {
  if (k > pool.size()) return false;
  std::vector<std::size_t> pick(k);
  std::iota(pick.begin(), pick.end(), 0);
  NodeSet s(k);
  while (true) {
    for (std::size_t a = 0; a < k; ++a) s[a] = pool[pick[a]];
    if (f(s)) return true;
    std::size_t a = k;
    while (a > 0 && pick[a - 1] == pool.size() - k + a - 1) --a;
    if (a == 0) return false;
    ++pick[a - 1];
    for (std::size_t b = a; b < k; ++b) pick[b] = pick[b - 1] + 1;
  }
}

}  // namespace detail

/// Order-independent PC algorithm: level-wise skeleton search on frozen
/// adjacency sets, collider orientation by a majority vote over separating
/// sets, then the Meek rules. `corr` may be a covariance; it is rescaled.
inline Pdag pc_cpdag(const CovMatrix& cov, Eigen::Index n, const CiTestConfig& cfg = {}) {
  cfg.validate();
  const CovMatrix corr = to_correlation(cov);
  const int p = static_cast<int>(corr.size());
  for (int k = 0; k < p; ++k)
    if (corr.labels()[k] != k + 1) throw InvalidInput("pc", "covariance must be labelled 1..p");
  const int max_level = std::min(cfg.max_condition_size.value_or(p - 2), static_cast<int>(n) - 4);

  std::vector<std::vector<bool>> adj(p + 1, std::vector<bool>(p + 1, true));
  for (int v = 1; v <= p; ++v) adj[v][v] = false;
  std::map<std::pair<Node, Node>, NodeSet> sepset;
  auto adjacent_set = [&](const std::vector<std::vector<bool>>& a, Node v) {
    NodeSet out;
    for (Node u = 1; u <= p; ++u)
      if (a[v][u]) out.push_back(u);
    return out;
  };
  auto indep = [&](Node i, Node j, const NodeSet& s) { return fisher_z_ci(corr, n, i, j, s, cfg.alpha); };

  for (int level = 0; level <= max_level; ++level) {
    const auto frozen = adj;
    bool any_large = false;
    for (Node i = 1; i <= p; ++i)
      for (Node j = 1; j <= p; ++j) {
        if (i == j || !adj[i][j] || !frozen[i][j]) continue;
        NodeSet pool = set_difference(adjacent_set(frozen, i), {j});
        if (static_cast<int>(pool.size()) < level) continue;
        any_large = true;
        detail::any_subset(pool, static_cast<std::size_t>(level), [&](const NodeSet& s) {
          if (!indep(i, j, s)) return false;
          adj[i][j] = adj[j][i] = false;
          sepset[{std::min(i, j), std::max(i, j)}] = s;
          return true;
        });
      }
    if (!any_large) break;
  }

  Pdag g(p);
  for (Node i = 1; i <= p; ++i)
    for (Node j = i + 1; j <= p; ++j)
      if (adj[i][j]) g.add_undirected(i, j);

  // Unshielded triples i - k - j: vote over all separating sets of (i, j)
  // drawn from adj(i) or adj(j) in the final skeleton.
  std::vector<std::tuple<Node, Node, Node>> colliders;
  for (Node k = 1; k <= p; ++k) {
    const NodeSet nb = g.adjacents(k);
    for (std::size_t a = 0; a < nb.size(); ++a)
      for (std::size_t b = a + 1; b < nb.size(); ++b) {
        const Node i = nb[a], j = nb[b];
        if (g.adjacent(i, j)) continue;
        int with_k = 0, total = 0;
        for (const NodeSet& base : {set_difference(g.adjacents(i), {j}), set_difference(g.adjacents(j), {i})}) {
          const int top = std::min(static_cast<int>(base.size()), max_level);
          for (int size = 0; size <= top; ++size)
            detail::any_subset(base, static_cast<std::size_t>(size), [&](const NodeSet& s) {
              if (indep(i, j, s)) {
                ++total;
                if (contains(s, k)) ++with_k;
              }
              return false;
            });
        }
        bool collider;
        if (total == 0) {
          auto it = sepset.find({i, j});
          collider = it != sepset.end() && !contains(it->second, k);
        } else if (2 * with_k == total) {
          continue;  // ambiguous
        } else {
          collider = 2 * with_k < total;
        }
        if (collider) colliders.emplace_back(i, k, j);
      }
  }
  // Apply in a fixed order; an orientation that conflicts with an earlier
  // one or would close a directed cycle is skipped.
  for (auto [i, k, j] : colliders) {
    for (Node end : {i, j}) {
      if (!g.has_undirected(end, k)) continue;
      Pdag trial = g;
      trial.orient(end, k);
      if (!has_directed_cycle(trial)) g = std::move(trial);
    }
  }
  meek_closure(g);
  return g;
}

/// Structural Hamming distance between two PDAGs on the same nodes: pairs
/// whose edge presence or mark differs.
inline int structural_hamming_distance(const Pdag& a, const Pdag& b) {
  if (a.num_nodes() != b.num_nodes()) throw InvalidInput("shd", "graphs differ in size");
  int d = 0;
  for (Node i = 1; i <= a.num_nodes(); ++i)
    for (Node j = i + 1; j <= a.num_nodes(); ++j) {
      const bool same = a.has_directed(i, j) == b.has_directed(i, j) && a.has_directed(j, i) == b.has_directed(j, i) &&
                        a.has_undirected(i, j) == b.has_undirected(i, j);
      if (!same) ++d;
    }
  return d;
}

}  // namespace jointida
