#include <catch_amalgamated.hpp>

#include <random>

#include "fixtures.hpp"
#include "jointida/parentsets.hpp"

using namespace jointida;

namespace {

using Tuple = std::vector<NodeSet>;

std::set<Tuple> distinct(const ParentMultiset& m) {
  std::set<Tuple> out;
  for (const auto& [t, c] : m.entries) out.insert(t);
  return out;
}

// A CPDAG drawn as the class of a random DAG, with targets drawn from its nodes.
std::pair<Pdag, std::vector<Node>> random_case(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(3, 9);
  const int p = size(rng);
  const Pdag c = dag_to_cpdag(random_weighted_dag(p, 2.5, rng).dag());
  std::vector<Node> nodes(p);
  std::iota(nodes.begin(), nodes.end(), 1);
  std::shuffle(nodes.begin(), nodes.end(), rng);
  const std::size_t k = 1 + rng() % 3;
  return {c, std::vector<Node>(nodes.begin(), nodes.begin() + std::min<std::size_t>(k, p))};
}

}  // namespace

TEST_CASE("three-node example") {
  const Pdag c = fixtures::fig2a();
  const auto semi = jointly_valid_parent_sets(c, {1, 2});
  CHECK_FALSE(semi.superset);
  CHECK(semi.entries == std::map<Tuple, std::uint64_t>{{{{}, {3}}, 1}, {{{3}, {}}, 1}, {{{3}, {3}}, 1}});
  const auto global = global_parent_sets(c, {1, 2});
  CHECK(global.entries == semi.entries);
  const auto local = local_combination_parent_sets(c, {1, 2});
  CHECK(local.superset);
  CHECK(local.distinct() == 4);
  CHECK(local.entries.count({{}, {}}) == 1);
}

TEST_CASE("eight-node example") {
  const Pdag c = fixtures::fig3a();
  const std::vector<Node> targets{1, 2, 3};
  const auto semi = jointly_valid_parent_sets(c, targets);
  const std::map<Tuple, std::uint64_t> expected{
      {{{}, {7}, {4}}, 1},  {{{}, {6, 7}, {4}}, 1}, {{{4}, {7}, {}}, 1},
      {{{4}, {6, 7}, {}}, 1}, {{{4}, {7}, {4}}, 1}, {{{4}, {6, 7}, {4}}, 1}};
  CHECK(semi.entries == expected);
  const auto global = global_parent_sets(c, targets);
  CHECK(global.total() == 12);
  for (const auto& [t, count] : global.entries) CHECK(count == 2);
  CHECK(multisets_equivalent(semi, global));
}

TEST_CASE("fully directed and edgeless graphs") {
  const Pdag c = dag_to_cpdag(Dag(3, {{1, 3}, {2, 3}}));
  const auto semi = jointly_valid_parent_sets(c, {3, 1});
  CHECK(semi.entries == std::map<Tuple, std::uint64_t>{{{{1, 2}, {}}, 1}});
  CHECK(local_combination_parent_sets(c, {3, 1}).entries == semi.entries);
  const Pdag empty(4);
  CHECK(global_parent_sets(empty, {1, 2}).entries == std::map<Tuple, std::uint64_t>{{{{}, {}}, 1}});
  CHECK_THROWS_AS(jointly_valid_parent_sets(empty, {1, 5}), InvalidInput);
  CHECK_THROWS_AS(jointly_valid_parent_sets(empty, {1, 1}), InvalidInput);
}

TEST_CASE("multiset equivalence up to ratios") {
  using M = std::map<char, int>;
  CHECK(multisets_equivalent(M{{'a', 2}, {'b', 1}}, M{{'a', 4}, {'b', 2}}));
  CHECK_FALSE(multisets_equivalent(M{{'a', 1}, {'b', 1}}, M{{'a', 2}, {'b', 1}}));
  CHECK_FALSE(multisets_equivalent(M{{'a', 1}}, M{{'a', 1}, {'b', 1}}));
  CHECK(multisets_equivalent(M{{'a', 3}, {'c', 5}}, M{{'a', 3}, {'c', 5}}));
}

TEST_CASE("semi-local and global multisets are equivalent") {
  std::mt19937_64 rng(2024);
  int checked = 0;
  while (checked < 80) {
    auto [c, targets] = random_case(rng);
    const auto semi = jointly_valid_parent_sets(c, targets);
    if (semi.superset) continue;
    const auto global = global_parent_sets(c, targets);
    CHECK(multisets_equivalent(semi, global));
    const auto local = distinct(local_combination_parent_sets(c, targets));
    for (const auto& t : distinct(global)) CHECK(local.count(t) == 1);
    ++checked;
  }
}

TEST_CASE("unrelated components do not change the output") {
  Pdag c(5);
  c.add_undirected(1, 3);
  c.add_undirected(3, 2);
  const auto before = jointly_valid_parent_sets(c, {1, 2});
  c.add_undirected(4, 5);
  const auto after = jointly_valid_parent_sets(c, {1, 2});
  CHECK(before.entries == after.entries);
  CHECK(multisets_equivalent(after, global_parent_sets(c, {1, 2})));
}

TEST_CASE("fallback on non-chordal or oversized components") {
  Pdag cycle(4);
  cycle.add_undirected(1, 2);
  cycle.add_undirected(2, 3);
  cycle.add_undirected(3, 4);
  cycle.add_undirected(4, 1);
  const auto r = jointly_valid_parent_sets(cycle, {1, 3});
  CHECK(r.superset);
  CHECK(distinct(r) == distinct(local_combination_parent_sets(cycle, {1, 3})));

  const Pdag chain = fixtures::fig2a();
  const auto capped = jointly_valid_parent_sets(chain, {1, 2}, 2);
  CHECK(capped.superset);
  CHECK(capped.distinct() == 4);
}
