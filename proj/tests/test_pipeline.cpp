#include <catch_amalgamated.hpp>

#include <random>

#include "fixtures.hpp"
#include "jointida/pipeline.hpp"

using namespace jointida;
using Catch::Matchers::WithinAbs;

namespace {

EffectMultiset scalars(const std::vector<std::pair<double, std::uint64_t>>& values) {
  EffectMultiset m{{1}, 2, Method::rrc, {}, false};
  for (auto [v, c] : values) m.entries.push_back({{v}, c, {{}}});
  return m;
}

// Effects with the parents of every DAG in the class, one entry per DAG.
EffectMultiset enumerated_effects(const CovMatrix& cov, const Pdag& c, const std::vector<Node>& targets, Node response,
                                  Method m) {
  EffectMultiset out{targets, response, m, {}, false};
  for (const Dag& d : enumerate_equivalence_class(c)) {
    std::vector<NodeSet> pa;
    for (Node t : targets) pa.push_back(d.parents(t));
    out.entries.push_back({opin_effect(m, cov, ParentAssignment(targets, pa), response).values, 1, pa});
  }
  return out;
}

}  // namespace

TEST_CASE("multiset distance") {
  const auto a = scalars({{1, 1}, {3, 1}});
  CHECK(multiset_distance(a, a) == 0.0);
  CHECK_THAT(multiset_distance(a, scalars({{3, 1}, {1.5, 1}})), WithinAbs(0.5, 1e-15));
  CHECK(std::isinf(multiset_distance(a, scalars({{1, 3}}))));
  // Multiplicities are expanded: {1,1,4} vs {1,2,4}.
  CHECK_THAT(multiset_distance(scalars({{1, 2}, {4, 1}}), scalars({{1, 1}, {2, 1}, {4, 1}})), WithinAbs(1.0, 1e-15));
}

TEST_CASE("summaries") {
  const auto m = scalars({{1, 1}, {-2, 1}, {3, 1}});
  CHECK(summarize(m, 0, Summary::minabs) == 1.0);
  CHECK_THAT(summarize(m, 0, Summary::aver), WithinAbs(2.0 / 3.0, 1e-15));
  EffectMultiset two{{1, 2}, 6, Method::rrc, {{{0.99, 0.4}, 2, {{5}, {3, 4}}}}, false};
  CHECK(summarize(two, 0, Summary::minabs) == 0.99);
  CHECK(summarize(two, 0, Summary::aver) == 0.99);
  CHECK(summarize(two, 1, Summary::aver) == 0.4);
  CHECK_THROWS_AS(summarize(two, 2, Summary::aver), InvalidInput);
}

TEST_CASE("summaries are Lipschitz in the multiset distance") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-2, 2);
  std::uniform_int_distribution<int> mult(1, 3), size(1, 5);
  for (int rep = 0; rep < 300; ++rep) {
    std::vector<std::pair<double, std::uint64_t>> xa, xb;
    std::uint64_t total = 0;
    for (int k = size(rng); k > 0; --k) {
      const auto c = static_cast<std::uint64_t>(mult(rng));
      xa.emplace_back(u(rng), c);
      total += c;
    }
    for (std::uint64_t k = 0; k < total; ++k) xb.emplace_back(u(rng), 1);
    const auto a = scalars(xa), b = scalars(xb);
    const double d = multiset_distance(a, b);
    REQUIRE(std::isfinite(d));
    CHECK(std::abs(summarize(a, 0, Summary::minabs) - summarize(b, 0, Summary::minabs)) <= d + 1e-12);
    CHECK(std::abs(summarize(a, 0, Summary::aver) - summarize(b, 0, Summary::aver)) <= d + 1e-12);
  }
}

TEST_CASE("known-graph regime reproduces the enumerated multiset") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 40; ++rep) {
    const int p = 5 + rep % 5;
    const LinearSem sem(random_weighted_dag(p, 2.5, rng));
    const Pdag c = dag_to_cpdag(sem.graph().dag());
    const CovMatrix s = true_covariance(sem);
    const std::vector<Node> targets = rep % 2 ? std::vector<Node>{1, 2} : std::vector<Node>{2};
    for (Method m : {Method::rrc, Method::mcd}) {
      const auto semi = joint_ida_known_graph(s, c, targets, p, m);
      CHECK(multisets_equivalent(semi, enumerated_effects(s, c, targets, p, m), 1e-10));
      // The true parents' effects are always among them.
      const auto truth = path_effect(sem.graph(), targets, p);
      bool found = false;
      for (const auto& e : semi.entries) {
        bool same = true;
        for (std::size_t q = 0; q < truth.size(); ++q) same = same && std::abs(e.values[q] - truth[q]) < 1e-10;
        found = found || same;
      }
      CHECK(found);
    }
  }
}

TEST_CASE("six-gene data through the full pipeline") {
  // X1 and X5 have partial correlation about 0.004 given X2, so the
  // 5 -> 1 edge needs n of a few times 1e5 at alpha = 0.01.
  const DataMatrix x = sample(LinearSem(fixtures::fig1()), 1000000, 12);
  JointIdaConfig cfg;
  const auto r = joint_ida(x, {1, 2}, 6, cfg);
  CHECK(r.graph == dag_to_cpdag(fixtures::fig1().dag()));
  const std::vector<NodeSet> truth{{5}, {3, 4}};
  const auto it = std::find_if(r.effects.entries.begin(), r.effects.entries.end(),
                               [&](const EffectEntry& e) { return e.parent_sets == truth; });
  REQUIRE(it != r.effects.entries.end());
  CHECK_THAT(it->values[0], WithinAbs(0.99, 0.05));
  CHECK_THAT(it->values[1], WithinAbs(0.4, 0.05));

  cfg.method = Method::mcd;
  const auto m = joint_ida(x, {1, 2}, 6, cfg);
  CHECK(multisets_equivalent(r.effects, m.effects, 0.02));
}

TEST_CASE("nonparanormal pipeline recovers latent-scale effects") {
  const LinearSem base = standardize(random_linear_sem(6, 2.0, 21));
  const std::vector<Transform> tr(6, Transform{TransformKind::cubic, {}, {}});
  const DataMatrix x = npn_sample(NpnModel(base, tr), 100000, 5);
  JointIdaConfig cfg;
  cfg.corr_kind = CorrKind::spearman;
  const auto r = joint_ida(x, {1, 2}, 6, cfg);
  const auto oracle = joint_ida_known_graph(true_covariance(base), dag_to_cpdag(base.graph().dag()), {1, 2}, 6, Method::rrc);
  CHECK(multiset_distance(r.effects, oracle) < 0.1);
}

TEST_CASE("epistasis scores") {
  const CovMatrix s = true_covariance(LinearSem(fixtures::fig1()));
  ParentMultiset pa{{1, 2}, {}, false};
  pa.add({{5}, {3, 4}});
  for (Method m : {Method::rrc, Method::mcd}) {
    const auto e = epistasis_from_parents(s, pa, 6, m);
    REQUIRE(e.entries.size() == 1);
    CHECK_THAT(e.entries[0].values[0], WithinAbs(-0.5, 1e-10));
    CHECK_THAT(e.entries[0].values[0], WithinAbs(-1.25 * 0.4, 1e-10));
  }
  // Targets in separate parts of the graph.
  const CovMatrix t = true_covariance(LinearSem(WeightedDag(4, {{1, 3, 0.5}, {2, 3, 0.7}})));
  ParentMultiset apart{{1, 2}, {}, false};
  apart.add({{}, {}});
  CHECK_THAT(epistasis_from_parents(t, apart, 3, Method::rrc).entries[0].values[0], WithinAbs(0.0, 1e-12));

  const DataMatrix x = sample(LinearSem(fixtures::fig1()), 50000, 4);
  const auto learned = epistasis_score(x, 1, 2, 6);
  CHECK(learned.entries.size() >= 1);
}

TEST_CASE("pipeline input checks") {
  const DataMatrix x = sample(LinearSem(fixtures::fig1()), 100, 4);
  CHECK_THROWS_AS(joint_ida(x, {1, 6}, 6), InvalidInput);
  CHECK_THROWS_AS(joint_ida(x, {1, 9}, 6), InvalidInput);
}
