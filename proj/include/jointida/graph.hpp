#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <tuple>
#include <utility>
#include <vector>

#include "jointida/types.hpp"

namespace jointida {

using Edge = std::pair<Node, Node>;

/// Partially directed graph on nodes 1..p. At most one edge per unordered
/// pair; an edge is either directed (i -> j) or undirected (i -- j).
class Pdag {
 public:
  Pdag() = default;
  explicit Pdag(int num_nodes) : p_(num_nodes), mark_(static_cast<std::size_t>(num_nodes) * num_nodes, 0) {
    if (num_nodes < 1) throw InvalidInput("graph", "number of nodes must be positive");
  }

  int num_nodes() const { return p_; }

  bool has_directed(Node i, Node j) const { return at(i, j) && !at(j, i); }
  bool has_undirected(Node i, Node j) const { return at(i, j) && at(j, i); }
  bool adjacent(Node i, Node j) const { return at(i, j) || at(j, i); }

  void add_directed(Node i, Node j) {
    check_new_edge(i, j);
    set(i, j, 1);
  }
  void add_undirected(Node i, Node j) {
    check_new_edge(i, j);
    set(i, j, 1);
    set(j, i, 1);
  }
  void remove_edge(Node i, Node j) {
    check_node(i);
    check_node(j);
    set(i, j, 0);
    set(j, i, 0);
  }
  /// Turns the undirected edge i -- j into i -> j.
  void orient(Node i, Node j) {
    if (!has_undirected(i, j)) throw InvalidInput("graph", "no undirected edge " + std::to_string(i) + "--" + std::to_string(j));
    set(j, i, 0);
  }

  NodeSet parents(Node v) const {
    check_node(v);
    NodeSet out;
    for (Node u = 1; u <= p_; ++u)
      if (has_directed(u, v)) out.push_back(u);
    return out;
  }
  NodeSet children(Node v) const {
    check_node(v);
    NodeSet out;
    for (Node u = 1; u <= p_; ++u)
      if (has_directed(v, u)) out.push_back(u);
    return out;
  }
  /// Nodes joined to v by an undirected edge.
  NodeSet neighbors(Node v) const {
    check_node(v);
    NodeSet out;
    for (Node u = 1; u <= p_; ++u)
      if (u != v && has_undirected(v, u)) out.push_back(u);
    return out;
  }
  NodeSet adjacents(Node v) const {
    check_node(v);
    NodeSet out;
    for (Node u = 1; u <= p_; ++u)
      if (u != v && adjacent(v, u)) out.push_back(u);
    return out;
  }

  std::vector<Edge> directed_edges() const {
    std::vector<Edge> out;
    for (Node i = 1; i <= p_; ++i)
      for (Node j = 1; j <= p_; ++j)
        if (has_directed(i, j)) out.emplace_back(i, j);
    return out;
  }
  /// Undirected edges as (i, j) with i < j.
  std::vector<Edge> undirected_edges() const {
    std::vector<Edge> out;
    for (Node i = 1; i <= p_; ++i)
      for (Node j = i + 1; j <= p_; ++j)
        if (has_undirected(i, j)) out.emplace_back(i, j);
    return out;
  }
  std::size_t num_edges() const { return directed_edges().size() + undirected_edges().size(); }

  bool operator==(const Pdag& other) const { return p_ == other.p_ && mark_ == other.mark_; }
  bool operator!=(const Pdag& other) const { return !(*this == other); }

  void check_node(Node v) const {
    if (v < 1 || v > p_) throw InvalidInput("graph", "node " + std::to_string(v) + " out of range 1.." + std::to_string(p_));
  }

 private:
  // mark_(i, j) == 1 means the edge between i and j may be traversed from i to j.
  bool at(Node i, Node j) const { return mark_[idx(i, j)] != 0; }
  void set(Node i, Node j, std::uint8_t value) { mark_[idx(i, j)] = value; }
  std::size_t idx(Node i, Node j) const { return static_cast<std::size_t>(i - 1) * p_ + (j - 1); }

  void check_new_edge(Node i, Node j) const {
    check_node(i);
    check_node(j);
    if (i == j) throw InvalidInput("graph", "self-loop at node " + std::to_string(i));
    if (adjacent(i, j))
      throw InvalidInput("graph", "more than one edge between " + std::to_string(i) + " and " + std::to_string(j));
  }

  int p_ = 0;
  std::vector<std::uint8_t> mark_;
};

/// True if the directed part of g contains a directed cycle.
inline bool has_directed_cycle(const Pdag& g) {
  const int p = g.num_nodes();
  std::vector<int> indegree(p + 1, 0);
  for (auto [i, j] : g.directed_edges()) ++indegree[j];
  std::vector<Node> stack;
  for (Node v = 1; v <= p; ++v)
    if (indegree[v] == 0) stack.push_back(v);
  int seen = 0;
  while (!stack.empty()) {
    Node v = stack.back();
    stack.pop_back();
    ++seen;
    for (Node c : g.children(v))
      if (--indegree[c] == 0) stack.push_back(c);
  }
  return seen != p;
}

/// True if there is a directed path from `from` to `to` (length >= 1) in g.
inline bool has_directed_path(const Pdag& g, Node from, Node to) {
  std::vector<char> seen(g.num_nodes() + 1, 0);
  std::vector<Node> stack{from};
  while (!stack.empty()) {
    Node v = stack.back();
    stack.pop_back();
    for (Node c : g.children(v)) {
      if (c == to) return true;
      if (!seen[c]) {
        seen[c] = 1;
        stack.push_back(c);
      }
    }
  }
  return false;
}

/// Directed acyclic graph. Construction validates acyclicity.
class Dag {
 public:
  Dag() = default;
  Dag(int num_nodes, const std::vector<Edge>& edges) : g_(num_nodes) {
    for (auto [i, j] : edges) g_.add_directed(i, j);
    if (has_directed_cycle(g_)) throw InvalidInput("graph", "edge set contains a directed cycle");
  }
  /// Adopts a fully directed Pdag.
  explicit Dag(const Pdag& g) : g_(g) {
    if (!g.undirected_edges().empty()) throw InvalidInput("graph", "graph has undirected edges");
    if (has_directed_cycle(g_)) throw InvalidInput("graph", "edge set contains a directed cycle");
  }

  int num_nodes() const { return g_.num_nodes(); }
  bool has_edge(Node i, Node j) const { return g_.has_directed(i, j); }
  bool adjacent(Node i, Node j) const { return g_.adjacent(i, j); }
  NodeSet parents(Node v) const { return g_.parents(v); }
  NodeSet children(Node v) const { return g_.children(v); }
  std::vector<Edge> edges() const { return g_.directed_edges(); }
  const Pdag& as_pdag() const { return g_; }

  bool operator==(const Dag& other) const { return g_ == other.g_; }
  bool operator!=(const Dag& other) const { return !(*this == other); }

 private:
  Pdag g_;
};

struct WeightedEdge {
  Node from;
  Node to;
  double weight;
};

/// DAG with nonzero real edge weights; B(i, j) is the weight of i -> j
/// (stored 0-based in the Eigen matrix).
class WeightedDag {
 public:
  WeightedDag() = default;
  WeightedDag(int num_nodes, const std::vector<WeightedEdge>& edges) {
    std::vector<Edge> plain;
    plain.reserve(edges.size());
    for (const auto& e : edges) plain.emplace_back(e.from, e.to);
    dag_ = Dag(num_nodes, plain);
    weights_ = Eigen::MatrixXd::Zero(num_nodes, num_nodes);
    for (const auto& e : edges) {
      if (e.weight == 0.0 || !std::isfinite(e.weight))
        throw InvalidInput("graph", "edge " + std::to_string(e.from) + "->" + std::to_string(e.to) + " needs a finite nonzero weight");
      weights_(e.from - 1, e.to - 1) = e.weight;
    }
  }

  int num_nodes() const { return dag_.num_nodes(); }
  const Dag& dag() const { return dag_; }
  double weight(Node i, Node j) const { return weights_(i - 1, j - 1); }
  /// The p x p weight matrix B, 0-based.
  const Eigen::MatrixXd& weights() const { return weights_; }
  NodeSet parents(Node v) const { return dag_.parents(v); }

  std::vector<WeightedEdge> weighted_edges() const {
    std::vector<WeightedEdge> out;
    for (auto [i, j] : dag_.edges()) out.push_back({i, j, weight(i, j)});
    return out;
  }

 private:
  Dag dag_;
  Eigen::MatrixXd weights_;
};

inline NodeSet parents(const Pdag& g, Node v) { return g.parents(v); }
inline NodeSet parents(const Dag& g, Node v) { return g.parents(v); }

/// Nodes reachable from v by directed paths, v included.
inline NodeSet descendants(const Dag& g, Node v) {
  g.as_pdag().check_node(v);
  std::vector<char> seen(g.num_nodes() + 1, 0);
  seen[v] = 1;
  std::vector<Node> stack{v};
  while (!stack.empty()) {
    Node u = stack.back();
    stack.pop_back();
    for (Node c : g.children(u))
      if (!seen[c]) {
        seen[c] = 1;
        stack.push_back(c);
      }
  }
  NodeSet out;
  for (Node u = 1; u <= g.num_nodes(); ++u)
    if (seen[u]) out.push_back(u);
  return out;
}

/// All nodes other than v that are not reachable from v.
inline NodeSet non_descendants(const Dag& g, Node v) {
  NodeSet all(g.num_nodes());
  for (Node u = 1; u <= g.num_nodes(); ++u) all[u - 1] = u;
  return set_difference(all, descendants(g, v));
}

/// Causal ordering; ties broken by lowest node index first.
inline std::vector<Node> topological_order(const Pdag& g) {
  const int p = g.num_nodes();
  std::vector<int> indegree(p + 1, 0);
  for (auto [i, j] : g.directed_edges()) ++indegree[j];
  std::priority_queue<Node, std::vector<Node>, std::greater<>> ready;
  for (Node v = 1; v <= p; ++v)
    if (indegree[v] == 0) ready.push(v);
  std::vector<Node> order;
  order.reserve(p);
  while (!ready.empty()) {
    Node v = ready.top();
    ready.pop();
    order.push_back(v);
    for (Node c : g.children(v))
      if (--indegree[c] == 0) ready.push(c);
  }
  if (static_cast<int>(order.size()) != p) throw InvalidInput("graph", "cycle detected");
  return order;
}

inline std::vector<Node> topological_order(const Dag& g) { return topological_order(g.as_pdag()); }

/// Colliders i -> k <- j with i, j non-adjacent, reported as (i, k, j), i < j.
inline std::vector<std::tuple<Node, Node, Node>> v_structures(const Pdag& g) {
  std::vector<std::tuple<Node, Node, Node>> out;
  for (Node k = 1; k <= g.num_nodes(); ++k) {
    NodeSet pa = g.parents(k);
    for (std::size_t a = 0; a < pa.size(); ++a)
      for (std::size_t b = a + 1; b < pa.size(); ++b)
        if (!g.adjacent(pa[a], pa[b])) out.emplace_back(pa[a], k, pa[b]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline bool same_skeleton(const Pdag& a, const Pdag& b) {
  if (a.num_nodes() != b.num_nodes()) return false;
  for (Node i = 1; i <= a.num_nodes(); ++i)
    for (Node j = i + 1; j <= a.num_nodes(); ++j)
      if (a.adjacent(i, j) != b.adjacent(i, j)) return false;
  return true;
}

namespace detail {

// Meek's orientation rules for the undirected edge a -- b, tested as a -> b.
inline bool meek_orients(const Pdag& g, Node a, Node b) {
  const int p = g.num_nodes();
  for (Node c = 1; c <= p; ++c) {
    if (c == a || c == b) continue;
    // R1: c -> a -- b, c and b non-adjacent.
    if (g.has_directed(c, a) && !g.adjacent(c, b)) return true;
    // R2: a -> c -> b.
    if (g.has_directed(a, c) && g.has_directed(c, b)) return true;
  }
  // R3: a -- c -> b, a -- d -> b, c and d non-adjacent.
  NodeSet nb = g.neighbors(a);
  for (std::size_t x = 0; x < nb.size(); ++x) {
    Node c = nb[x];
    if (c == b || !g.has_directed(c, b)) continue;
    for (std::size_t y = x + 1; y < nb.size(); ++y) {
      Node d = nb[y];
      if (d != b && g.has_directed(d, b) && !g.adjacent(c, d)) return true;
    }
  }
  // R4: a -- d -> c -> b, a adjacent to c, d and b non-adjacent.
  for (Node d : nb) {
    if (d == b || g.adjacent(d, b)) continue;
    for (Node c : g.children(d))
      if (c != a && c != b && g.has_directed(c, b) && g.adjacent(a, c)) return true;
  }
  return false;
}

}  // namespace detail

/// Applies Meek's rules R1-R4 until none fires. An orientation that would
/// close a directed cycle is skipped. Returns true if anything changed.
inline bool meek_closure(Pdag& g) {
  bool any = false;
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto [i, j] : g.undirected_edges()) {
      for (auto [a, b] : {Edge{i, j}, Edge{j, i}}) {
        if (!g.has_undirected(a, b)) break;
        if (detail::meek_orients(g, a, b) && !has_directed_path(g, b, a)) {
          g.orient(a, b);
          changed = any = true;
          break;
        }
      }
    }
  }
  return any;
}

/// True if some Meek rule would orient an edge of g without closing a cycle.
inline bool meek_rule_applies(const Pdag& g) {
  for (auto [i, j] : g.undirected_edges())
    for (auto [a, b] : {Edge{i, j}, Edge{j, i}})
      if (detail::meek_orients(g, a, b) && !has_directed_path(g, b, a)) return true;
  return false;
}

/// Completed PDAG of the Markov equivalence class of g.
inline Pdag dag_to_cpdag(const Dag& g) {
  Pdag c(g.num_nodes());
  for (auto [i, j] : g.edges()) c.add_undirected(std::min(i, j), std::max(i, j));
  for (auto [i, k, j] : v_structures(g.as_pdag())) {
    if (c.has_undirected(i, k)) c.orient(i, k);
    if (c.has_undirected(j, k)) c.orient(j, k);
  }
  meek_closure(c);
  return c;
}

/// All DAGs with the skeleton and v-structures of c, in lexicographic order
/// of the orientation bitmask over c's undirected edges (bit set = edge
/// points from the larger to the smaller label). Throws if c has no
/// consistent extension or if more than `limit` DAGs would be produced.
inline std::vector<Dag> enumerate_equivalence_class(const Pdag& c,
                                                    std::size_t limit = std::numeric_limits<std::size_t>::max()) {
  const auto target_vs = v_structures(c);
  const auto free_edges = c.undirected_edges();
  std::vector<std::pair<std::vector<bool>, Dag>> found;

  std::function<void(const Pdag&)> extend = [&](const Pdag& g) {
    if (has_directed_cycle(g)) return;
    const auto und = g.undirected_edges();
    if (und.empty()) {
      if (v_structures(g) != target_vs) return;
      std::vector<bool> key;
      key.reserve(free_edges.size());
      for (auto [i, j] : free_edges) key.push_back(g.has_directed(j, i));
      found.emplace_back(std::move(key), Dag(g));
      if (found.size() > limit)
        throw InvalidInput("enumerate", "equivalence class exceeds the enumeration limit of " + std::to_string(limit));
      return;
    }
    auto [i, j] = und.front();
    for (auto [a, b] : {Edge{i, j}, Edge{j, i}}) {
      Pdag next = g;
      next.orient(a, b);
      meek_closure(next);
      extend(next);
    }
  };
  extend(c);
  if (found.empty()) throw InvalidInput("enumerate", "graph admits no consistent DAG extension");
  std::sort(found.begin(), found.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  std::vector<Dag> out;
  out.reserve(found.size());
  for (auto& f : found) out.push_back(std::move(f.second));
  return out;
}

/// Connected component of the undirected part of a graph. `graph` holds the
/// component's undirected edges relabelled 1..m; nodes[k - 1] is the
/// original label of local node k.
struct UndirectedComponent {
  NodeSet nodes;
  Pdag graph;

  Node label(Node local) const { return nodes.at(local - 1); }
  Node local(Node label) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), label);
    if (it == nodes.end() || *it != label) throw InvalidInput("graph", "node " + std::to_string(label) + " not in component");
    return static_cast<Node>(it - nodes.begin()) + 1;
  }
  bool contains(Node label) const { return jointida::contains(nodes, label); }
};

/// Connected components of the undirected part of c (singletons included),
/// ordered by smallest member.
inline std::vector<UndirectedComponent> undirected_components(const Pdag& c) {
  const int p = c.num_nodes();
  std::vector<int> comp(p + 1, -1);
  std::vector<UndirectedComponent> out;
  for (Node s = 1; s <= p; ++s) {
    if (comp[s] >= 0) continue;
    const int id = static_cast<int>(out.size());
    NodeSet members;
    std::vector<Node> stack{s};
    comp[s] = id;
    while (!stack.empty()) {
      Node v = stack.back();
      stack.pop_back();
      members.push_back(v);
      for (Node u : c.neighbors(v))
        if (comp[u] < 0) {
          comp[u] = id;
          stack.push_back(u);
        }
    }
    std::sort(members.begin(), members.end());
    UndirectedComponent uc{members, Pdag(static_cast<int>(members.size()))};
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b)
        if (c.has_undirected(members[a], members[b]))
          uc.graph.add_undirected(static_cast<Node>(a + 1), static_cast<Node>(b + 1));
    out.push_back(std::move(uc));
  }
  return out;
}

/// Parent sets of v obtainable by orienting only the undirected edges at v
/// without creating a new collider at v, each joined with v's directed parents.
inline std::vector<NodeSet> locally_valid_parent_sets(const Pdag& c, Node v) {
  const NodeSet directed = c.parents(v);
  const NodeSet nb = c.neighbors(v);
  if (nb.size() > 24) throw InvalidInput("parent sets", "node " + std::to_string(v) + " has too many undirected neighbours");
  std::set<NodeSet> result;
  const std::uint32_t subsets = 1u << nb.size();
  for (std::uint32_t mask = 0; mask < subsets; ++mask) {
    NodeSet chosen;
    for (std::size_t k = 0; k < nb.size(); ++k)
      if (mask & (1u << k)) chosen.push_back(nb[k]);
    bool collider = false;
    for (std::size_t a = 0; a < chosen.size() && !collider; ++a) {
      for (std::size_t b = a + 1; b < chosen.size() && !collider; ++b)
        collider = !c.adjacent(chosen[a], chosen[b]);
      for (Node d : directed)
        if (!collider) collider = !c.adjacent(chosen[a], d);
    }
    if (!collider) result.insert(set_union(chosen, directed));
  }
  return {result.begin(), result.end()};
}

/// Chordality of the undirected part of g: maximum cardinality search
/// followed by a zero fill-in check.
inline bool is_chordal(const Pdag& g) {
  const int p = g.num_nodes();
  std::vector<int> weight(p + 1, 0);
  std::vector<int> position(p + 1, -1);  // visit index in the search
  std::vector<Node> order;
  order.reserve(p);
  for (int step = 0; step < p; ++step) {
    Node best = 0;
    for (Node v = 1; v <= p; ++v)
      if (position[v] < 0 && (best == 0 || weight[v] > weight[best])) best = v;
    position[best] = step;
    order.push_back(best);
    for (Node u : g.neighbors(best))
      if (position[u] < 0) ++weight[u];
  }
  for (Node v : order) {
    // Earlier-visited neighbours must form a clique; it suffices that they
    // are all adjacent to the most recently visited one.
    NodeSet earlier;
    Node last = 0;
    for (Node u : g.neighbors(v))
      if (position[u] < position[v]) {
        earlier.push_back(u);
        if (last == 0 || position[u] > position[last]) last = u;
      }
    for (Node u : earlier)
      if (u != last && !g.has_undirected(u, last)) return false;
  }
  return true;
}

}  // namespace jointida
