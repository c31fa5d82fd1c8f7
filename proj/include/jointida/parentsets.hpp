#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "jointida/graph.hpp"
#include "jointida/opin.hpp"
#include "jointida/types.hpp"

namespace jointida {

/// Multiset of parent-set tuples for an ordered list of intervention nodes.
/// `superset` marks results that may contain tuples no DAG in the class
/// realizes (local-combination fallback).
struct ParentMultiset {
  std::vector<Node> targets;
  std::map<std::vector<NodeSet>, std::uint64_t> entries;
  bool superset = false;

  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (const auto& [tuple, count] : entries) n += count;
    return n;
  }
  std::size_t distinct() const { return entries.size(); }

  void add(std::vector<NodeSet> tuple, std::uint64_t multiplicity = 1) {
    if (tuple.size() != targets.size()) throw InvalidInput("parent sets", "tuple arity does not match targets");
    if (multiplicity == 0) throw InvalidInput("parent sets", "multiplicity must be positive");
    entries[std::move(tuple)] += multiplicity;
  }

  std::vector<ParentAssignment> assignments() const {
    std::vector<ParentAssignment> out;
    for (const auto& [tuple, count] : entries) out.emplace_back(targets, tuple);
    return out;
  }
};

/// Equal distinct elements with a constant multiplicity ratio. Ratios are
/// compared by exact integer cross-multiplication.
template <class Key, class Count>
bool multisets_equivalent(const std::map<Key, Count>& a, const std::map<Key, Count>& b) {
  if (a.size() != b.size()) return false;
  if (a.empty()) return true;
  const auto a0 = static_cast<unsigned __int128>(a.begin()->second);
  const auto b0 = static_cast<unsigned __int128>(b.begin()->second);
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (!(ia->first == ib->first)) return false;
    if (static_cast<unsigned __int128>(ia->second) * b0 != static_cast<unsigned __int128>(ib->second) * a0) return false;
  }
  return true;
}

inline bool multisets_equivalent(const ParentMultiset& a, const ParentMultiset& b) {
  return a.targets == b.targets && multisets_equivalent(a.entries, b.entries);
}

namespace detail {

inline void check_target_list(const Pdag& c, const std::vector<Node>& targets, const std::string& stage) {
  if (targets.empty()) throw InvalidInput(stage, "at least one target is required");
  for (Node t : targets)
    if (t < 1 || t > c.num_nodes()) throw InvalidInput(stage, "target " + std::to_string(t) + " out of range");
  if (make_node_set(targets).size() != targets.size()) throw InvalidInput(stage, "targets must be distinct");
}

// Tuples of undirected-part parents for the targets inside one component,
// indexed by position in the full target list.
struct ComponentTuples {
  std::vector<std::size_t> positions;
  std::map<std::vector<NodeSet>, std::uint64_t> tuples;
  bool fallback = false;
};

// Calls f(parts chosen, product of multiplicities) for every element of the
// Cartesian product of the components' tuple maps.
inline void visit_products(const std::vector<ComponentTuples>& comps,
                           const std::function<void(const std::vector<const std::vector<NodeSet>*>&, std::uint64_t)>& f) {
  std::vector<const std::vector<NodeSet>*> chosen(comps.size());
  std::function<void(std::size_t, std::uint64_t)> rec = [&](std::size_t k, std::uint64_t mult) {
    if (k == comps.size()) {
      f(chosen, mult);
      return;
    }
    for (const auto& [tuple, count] : comps[k].tuples) {
      chosen[k] = &tuple;
      rec(k + 1, mult * count);
    }
  };
  rec(0, 1);
}

}  // namespace detail

/// Upper bound on DAGs enumerated per undirected component before falling
/// back to local combinations.
inline constexpr std::size_t kComponentDagLimit = 200000;

/// Semi-local extraction: enumerate each undirected component holding a
/// target separately, cross-combine the per-component tuples and add the
/// directed parents. Components with more than `max_enum` nodes, too many
/// orientations, or a non-chordal skeleton use the local combinations
/// instead and mark the result as a possible superset.
inline ParentMultiset jointly_valid_parent_sets(const Pdag& c, const std::vector<Node>& targets, std::size_t max_enum = 12) {
  detail::check_target_list(c, targets, "parent sets");
  ParentMultiset out{targets, {}, false};

  std::vector<detail::ComponentTuples> parts;
  for (const auto& comp : undirected_components(c)) {
    detail::ComponentTuples part;
    for (std::size_t k = 0; k < targets.size(); ++k)
      if (comp.contains(targets[k])) part.positions.push_back(k);
    if (part.positions.empty() || comp.nodes.size() == 1) continue;

    bool enumerated = false;
    if (comp.nodes.size() <= max_enum && is_chordal(comp.graph)) {
      try {
        for (const Dag& d : enumerate_equivalence_class(comp.graph, kComponentDagLimit)) {
          std::vector<NodeSet> tuple;
          for (std::size_t k : part.positions) {
            NodeSet pa;
            for (Node u : d.parents(comp.local(targets[k]))) pa.push_back(comp.label(u));
            tuple.push_back(pa);
          }
          ++part.tuples[tuple];
        }
        enumerated = true;
      } catch (const InvalidInput&) {
        part.tuples.clear();
      }
    }
    if (!enumerated) {
      part.fallback = true;
      out.superset = true;
      std::vector<std::vector<NodeSet>> options;
      for (std::size_t k : part.positions) {
        std::vector<NodeSet> local;
        for (const NodeSet& s : locally_valid_parent_sets(c, targets[k])) local.push_back(set_difference(s, c.parents(targets[k])));
        options.push_back(std::move(local));
      }
      std::vector<NodeSet> tuple(options.size());
      std::function<void(std::size_t)> rec = [&](std::size_t k) {
        if (k == options.size()) {
          part.tuples[tuple] = 1;
          return;
        }
        for (const NodeSet& s : options[k]) {
          tuple[k] = s;
          rec(k + 1);
        }
      };
      rec(0);
    }
    parts.push_back(std::move(part));
  }

  std::vector<NodeSet> directed;
  for (Node t : targets) directed.push_back(c.parents(t));
  detail::visit_products(parts, [&](const std::vector<const std::vector<NodeSet>*>& chosen, std::uint64_t mult) {
    std::vector<NodeSet> tuple = directed;
    for (std::size_t q = 0; q < parts.size(); ++q)
      for (std::size_t r = 0; r < parts[q].positions.size(); ++r) {
        const std::size_t k = parts[q].positions[r];
        tuple[k] = set_union(tuple[k], (*chosen[q])[r]);
      }
    out.add(std::move(tuple), mult);
  });
  return out;
}

/// Parent tuples of every DAG in the equivalence class of c, by brute-force
/// enumeration.
inline ParentMultiset global_parent_sets(const Pdag& c, const std::vector<Node>& targets,
                                         std::size_t limit = kComponentDagLimit) {
  detail::check_target_list(c, targets, "parent sets");
  ParentMultiset out{targets, {}, false};
  for (const Dag& d : enumerate_equivalence_class(c, limit)) {
    std::vector<NodeSet> tuple;
    for (Node t : targets) tuple.push_back(d.parents(t));
    out.add(std::move(tuple));
  }
  return out;
}

/// Cartesian product of the per-target locally valid parent sets, each
/// with multiplicity one. May contain tuples no single DAG realizes.
inline ParentMultiset local_combination_parent_sets(const Pdag& c, const std::vector<Node>& targets) {
  detail::check_target_list(c, targets, "parent sets");
  ParentMultiset out{targets, {}, false};
  std::vector<std::vector<NodeSet>> options;
  for (Node t : targets) {
    options.push_back(locally_valid_parent_sets(c, t));
    if (!c.neighbors(t).empty()) out.superset = true;
  }
  std::vector<NodeSet> tuple(targets.size());
  std::function<void(std::size_t)> rec = [&](std::size_t k) {
    if (k == options.size()) {
      out.entries[tuple] = 1;
      return;
    }
    for (const NodeSet& s : options[k]) {
      tuple[k] = s;
      rec(k + 1);
    }
  };
  rec(0);
  return out;
}

}  // namespace jointida
