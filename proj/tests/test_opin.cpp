#include <catch_amalgamated.hpp>

#include <random>

#include "fixtures.hpp"
#include "jointida/opin.hpp"

using namespace jointida;
using Catch::Matchers::WithinAbs;

namespace {

ParentAssignment true_parents(const WeightedDag& g, const std::vector<Node>& targets) {
  std::vector<NodeSet> pa;
  for (Node t : targets) pa.push_back(g.parents(t));
  return {targets, pa};
}

// Ordinary least squares coefficient of X_i on (X_i, X_S) from raw data.
double ols_coefficient(const DataMatrix& x, Node i, Node p, const NodeSet& s) {
  Eigen::MatrixXd design(x.rows(), static_cast<Eigen::Index>(s.size()) + 2);
  design.col(0).setOnes();
  design.col(1) = x.col(i - 1);
  for (std::size_t k = 0; k < s.size(); ++k) design.col(static_cast<Eigen::Index>(k) + 2) = x.col(s[k] - 1);
  const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(x.col(p - 1));
  return beta(1);
}

CovMatrix sample_cov(const DataMatrix& x) {
  Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  return CovMatrix::with_default_labels(c.transpose() * c / (x.rows() - 1.0));
}

}  // namespace

TEST_CASE("six-gene example with known parents") {
  const WeightedDag g = fixtures::fig1();
  const CovMatrix s = true_covariance(LinearSem(g));
  const auto pa = true_parents(g, {1, 2});
  CHECK_THAT(adjusted_effect(s, 1, 6, g.parents(1)), WithinAbs(1.49, 1e-10));
  CHECK_THAT(adjusted_effect(s, 2, 6, g.parents(2)), WithinAbs(0.4, 1e-10));
  for (Method m : {Method::rrc, Method::mcd}) {
    const auto e = opin_effect(m, s, pa, 6);
    CHECK_THAT(e.values[0], WithinAbs(0.99, 1e-10));
    CHECK_THAT(e.values[1], WithinAbs(0.4, 1e-10));
  }
}

TEST_CASE("no single adjustment set gives the joint effect") {
  const CovMatrix s = true_covariance(LinearSem(fixtures::fig1()));
  const std::vector<Node> pool{2, 3, 4, 5};
  for (unsigned mask = 0; mask < 16; ++mask) {
    NodeSet set;
    for (unsigned k = 0; k < 4; ++k)
      if (mask >> k & 1) set.push_back(pool[k]);
    CHECK(std::abs(adjusted_effect(s, 1, 6, set) - 0.99) > 1e-3);
  }
}

TEST_CASE("adjusted effect equals least squares on data") {
  const LinearSem sem = random_linear_sem(6, 2.0, 3);
  const DataMatrix x = sample(sem, 500, 8);
  const CovMatrix s = sample_cov(x);
  CHECK_THAT(adjusted_effect(s, 2, 5, {1, 3}), WithinAbs(ols_coefficient(x, 2, 5, {1, 3}), 1e-10));
  CHECK(adjusted_effect(s, 2, 5, {5, 1}) == 0.0);
  CHECK_THROWS_AS(adjusted_effect(s, 2, 2, {}), InvalidInput);
}

TEST_CASE("RRC, MCD and path method agree on random SEMs") {
  std::mt19937_64 rng(42);
  for (int rep = 0; rep < 60; ++rep) {
    const int p = 5 + rep % 6;
    const LinearSem sem(random_weighted_dag(p, 2.0, rng));
    const CovMatrix s = true_covariance(sem);
    std::vector<Node> nodes(p);
    std::iota(nodes.begin(), nodes.end(), 1);
    std::shuffle(nodes.begin(), nodes.end(), rng);
    const std::size_t k = 1 + rep % 3;
    const std::vector<Node> targets(nodes.begin(), nodes.begin() + k);
    const Node response = nodes[k];
    const auto pa = true_parents(sem.graph(), targets);
    const auto path = path_effect(sem.graph(), targets, response);
    const auto rrc = rrc_effect(s, pa, response).values;
    const auto mcd = mcd_effect(s, pa, response).values;
    for (std::size_t q = 0; q < k; ++q) {
      CHECK_THAT(rrc[q], WithinAbs(path[q], 1e-8));
      CHECK_THAT(mcd[q], WithinAbs(path[q], 1e-8));
    }
  }
}

TEST_CASE("single-target MCD is the adjusted regression") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const LinearSem sem = random_linear_sem(7, 2.0, seed);
    const CovMatrix s = sample_cov(sample(sem, 80, seed + 100));
    const NodeSet pa = sem.graph().parents(3);
    for (Node resp : {1, 2, 4, 7}) {
      const ParentAssignment a({3}, {pa});
      CHECK_THAT(mcd_effect(s, a, resp).values[0], WithinAbs(adjusted_effect(s, 3, resp, pa), 1e-10));
    }
  }
}

TEST_CASE("generalized Cholesky factors") {
  const CovMatrix s = true_covariance(random_linear_sem(6, 2.0, 17));
  const std::vector<Node> order{4, 2, 6, 1, 3, 5};
  const auto f = generalized_cholesky(s, order);
  const Eigen::MatrixXd a = s.restricted(order).values();
  const Eigen::MatrixXd d = f.L * a * f.L.transpose();
  CHECK((d - Eigen::MatrixXd(f.D.asDiagonal())).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((f.L.diagonal().array() - 1.0).abs().maxCoeff() == 0.0);
  CHECK(f.L.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("MCD on the six-gene example keeps the input label order") {
  const WeightedDag g = fixtures::fig1();
  const LinearSem sem(g);
  const auto pa = true_parents(g, {1, 2});
  const CovMatrix modified = mcd_sigma_k(true_covariance(sem), pa);
  CHECK((modified.values() - intervened_covariance(sem, {1, 2}).values()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("response among the parents gives zero") {
  const CovMatrix s = true_covariance(LinearSem(fixtures::fig1()));
  const ParentAssignment pa({4, 2}, {{1, 3, 5}, {3, 4}});
  for (Method m : {Method::rrc, Method::mcd}) {
    const auto e = opin_effect(m, s, pa, 3);
    CHECK(e.values[0] == 0.0);
    CHECK(e.values[1] == 0.0);
  }
}

TEST_CASE("singular blocks are reported with their nodes") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
  a(0, 1) = a(1, 0) = 1.0;
  const CovMatrix s = CovMatrix::with_default_labels(a);
  try {
    adjusted_effect(s, 1, 3, {2});
    FAIL("expected a numerical error");
  } catch (const NumericalError& e) {
    CHECK(e.stage() == "adjusted effect");
    CHECK(e.nodes() == std::vector<Node>{1, 2});
  }
  CHECK_THROWS_AS(mcd_effect(s, ParentAssignment({1}, {{2}}), 3), NumericalError);
}

TEST_CASE("mechanism change") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const LinearSem sem = random_linear_sem(7, 2.5, seed);
    const CovMatrix s = true_covariance(sem);
    for (Node v = 1; v <= 7; ++v) {
      const NodeSet pa = sem.graph().parents(v);
      std::map<Node, double> original;
      for (Node u : pa) original[u] = sem.graph().weight(u, v);
      CHECK((mechanism_change_covariance(s, v, pa, original).values() - s.values()).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((mechanism_change_covariance(s, v, pa, {}).values() - intervened_covariance(sem, {v}).values())
                .cwiseAbs()
                .maxCoeff() < 1e-10);
    }
  }
  const CovMatrix s = true_covariance(LinearSem(fixtures::fig1()));
  CHECK_THROWS_AS(mechanism_change_covariance(s, 1, {5}, {{3, 0.5}}), InvalidInput);
}

TEST_CASE("method names") {
  CHECK(parse_method("rrc") == Method::rrc);
  CHECK(to_string(Method::mcd) == "mcd");
  CHECK_THROWS_AS(parse_method("ols"), InvalidInput);
}
