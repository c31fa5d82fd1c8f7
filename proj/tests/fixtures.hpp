#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "jointida/graph.hpp"
#include "jointida/sem.hpp"

namespace fixtures {

using namespace jointida;

// Weighted DAG of the six-gene running example.
inline WeightedDag fig1() {
  return WeightedDag(6, {{5, 1, 0.2}, {3, 2, 0.6}, {4, 2, 0.5}, {1, 3, 1.1}, {1, 4, 0.3},
                         {3, 4, 0.8}, {5, 4, 0.7}, {2, 6, 0.4}, {3, 6, 0.9}});
}

// 1 -- 3 -- 2
inline Pdag fig2a() {
  Pdag c(3);
  c.add_undirected(1, 3);
  c.add_undirected(3, 2);
  return c;
}

// Eight-node CPDAG with undirected components {1,3,4}, {2,6}, {5,8}.
inline Pdag fig3a() {
  Pdag c(8);
  c.add_undirected(1, 4);
  c.add_undirected(4, 3);
  c.add_undirected(2, 6);
  c.add_undirected(5, 8);
  c.add_directed(3, 7);
  c.add_directed(5, 7);
  c.add_directed(7, 2);
  c.add_directed(7, 6);
  return c;
}

// Independent oracle for a Markov equivalence class: try all 2^m
// orientations of the skeleton and keep the acyclic ones with matching
// v-structures.
inline std::vector<Dag> brute_force_class(const Pdag& c) {
  std::vector<Edge> skeleton;
  for (Node i = 1; i <= c.num_nodes(); ++i)
    for (Node j = i + 1; j <= c.num_nodes(); ++j)
      if (c.adjacent(i, j)) skeleton.emplace_back(i, j);
  const auto target = v_structures(c);
  std::vector<Dag> out;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << skeleton.size()); ++mask) {
    Pdag g(c.num_nodes());
    for (std::size_t e = 0; e < skeleton.size(); ++e) {
      auto [i, j] = skeleton[e];
      if (mask >> e & 1)
        g.add_directed(j, i);
      else
        g.add_directed(i, j);
    }
    if (has_directed_cycle(g) || v_structures(g) != target) continue;
    out.emplace_back(g);
  }
  return out;
}

// Edge i -> j is compelled iff every member orients it that way.
inline Pdag brute_force_cpdag(const std::vector<Dag>& members) {
  const Dag& first = members.front();
  Pdag c(first.num_nodes());
  for (auto [i, j] : first.edges()) {
    bool same = true;
    for (const Dag& d : members) same = same && d.has_edge(i, j);
    if (same)
      c.add_directed(i, j);
    else
      c.add_undirected(i, j);
  }
  return c;
}

inline Dag random_dag(int p, double degree, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_weighted_dag(p, degree, rng).dag();
}

}  // namespace fixtures
