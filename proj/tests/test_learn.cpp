#include <catch_amalgamated.hpp>

#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "jointida/learn.hpp"

using namespace jointida;
using Catch::Matchers::WithinAbs;

namespace {

// Kendall's tau-b by direct pair counting.
double kendall_brute(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  double conc = 0, disc = 0, tx = 0, ty = 0;
  for (Eigen::Index a = 0; a < x.size(); ++a)
    for (Eigen::Index b = a + 1; b < x.size(); ++b) {
      const double dx = x(a) - x(b), dy = y(a) - y(b);
      if (dx == 0 && dy == 0) continue;
      if (dx == 0)
        ++tx;
      else if (dy == 0)
        ++ty;
      else if (dx * dy > 0)
        ++conc;
      else
        ++disc;
    }
  return (conc - disc) / std::sqrt((conc + disc + tx) * (conc + disc + ty));
}

// Pearson correlation of the rank vectors.
double spearman_brute(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  auto rank = [](const Eigen::VectorXd& v) {
    Eigen::VectorXd r(v.size());
    for (Eigen::Index a = 0; a < v.size(); ++a) {
      double less = 0, equal = 0;
      for (Eigen::Index b = 0; b < v.size(); ++b) {
        less += v(b) < v(a);
        equal += v(b) == v(a);
      }
      r(a) = less + (equal + 1) / 2;
    }
    return r;
  };
  Eigen::VectorXd rx = rank(x), ry = rank(y);
  rx.array() -= rx.mean();
  ry.array() -= ry.mean();
  return rx.dot(ry) / std::sqrt(rx.squaredNorm() * ry.squaredNorm());
}

Pdag chain_cpdag() {
  Pdag c(3);
  c.add_undirected(1, 2);
  c.add_undirected(2, 3);
  return c;
}

}  // namespace

TEST_CASE("sample covariance") {
  DataMatrix x(2, 2);
  x << 0, 0, 2, 2;
  const CovMatrix s = sample_covariance(x);
  CHECK(s.values() == (Eigen::MatrixXd(2, 2) << 2, 2, 2, 2).finished());
  DataMatrix constant(3, 2);
  constant << 1, 5, 2, 5, 3, 5;
  try {
    sample_covariance(constant);
    FAIL("expected an error");
  } catch (const NumericalError& e) {
    CHECK(e.nodes() == std::vector<Node>{2});
  }
  CHECK_THROWS_AS(sample_covariance(DataMatrix(1, 2)), InvalidInput);

  const LinearSem sem(fixtures::fig1());
  const CovMatrix big = sample_covariance(sample(sem, 1000000, 2));
  CHECK((big.values() - true_covariance(sem).values()).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("rank correlations against direct computation") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  DataMatrix x(300, 3);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    x(r, 0) = z(rng);
    x(r, 1) = x(r, 0) + z(rng);
    x(r, 2) = -0.3 * x(r, 1) + z(rng);
  }
  const auto sp = rank_correlation_matrix(x, CorrKind::spearman);
  const auto kd = rank_correlation_matrix(x, CorrKind::kendall);
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b) {
      CHECK_THAT(sp.corr(a + 1, b + 1), WithinAbs(2 * std::sin(std::numbers::pi / 6 * spearman_brute(x.col(a), x.col(b))), 1e-12));
      CHECK_THAT(kd.corr(a + 1, b + 1), WithinAbs(std::sin(std::numbers::pi / 2 * kendall_brute(x.col(a), x.col(b))), 1e-12));
    }
  CHECK_FALSE(sp.clipped);
}

TEST_CASE("Kendall tau-b with ties") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> level(0, 4);
  Eigen::VectorXd x(200), y(200);
  for (int r = 0; r < 200; ++r) {
    x(r) = level(rng);
    y(r) = level(rng) + 0.5 * x(r);
  }
  CHECK_THAT(detail::kendall_tau(x, y), WithinAbs(kendall_brute(x, y), 1e-12));
  DataMatrix d(200, 2);
  d << x, y;
  CHECK_THROWS_AS(rank_correlation_matrix(d, CorrKind::spearman), InvalidInput);
}

TEST_CASE("monotone pairs and invariance") {
  DataMatrix x = sample(LinearSem(fixtures::fig1()), 2000, 3);
  DataMatrix y = x;
  y.col(0) = x.col(0).array().exp();
  y.col(3) = x.col(3).array().cube();
  y.col(5) = -(-x.col(5).array()).exp();
  for (CorrKind k : {CorrKind::spearman, CorrKind::kendall})
    CHECK(rank_correlation_matrix(x, k).corr.values() == rank_correlation_matrix(y, k).corr.values());
  DataMatrix pair(50, 2);
  for (int r = 0; r < 50; ++r) pair.row(r) << r * 0.1, std::exp(r * 0.1);
  // The singular 2 x 2 matrix is lifted to eigenvalue 1e-8 by the projection.
  for (CorrKind k : {CorrKind::spearman, CorrKind::kendall}) {
    const auto r = rank_correlation_matrix(pair, k);
    CHECK(r.clipped);
    CHECK_THAT(r.corr(1, 2), WithinAbs(1.0, 1e-7));
  }
}

TEST_CASE("independent columns give small rank correlations") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> z;
  DataMatrix x(10000, 4);
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (int c = 0; c < 4; ++c) x(r, c) = z(rng);
  const auto m = rank_correlation_matrix(x, CorrKind::spearman).corr.values();
  CHECK((m - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("nonparanormal rank correlation recovers the latent matrix") {
  const LinearSem base = standardize(random_linear_sem(6, 2.0, 4));
  std::vector<Transform> tr(6, Transform{TransformKind::exp, {}, {}});
  tr[1].kind = tr[4].kind = TransformKind::cubic;
  const DataMatrix x = npn_sample(NpnModel(base, tr), 100000, 8);
  const auto r = rank_correlation_matrix(x, CorrKind::spearman);
  CHECK((r.corr.values() - true_covariance(base).values()).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("nearest positive definite projection") {
  Eigen::MatrixXd a(3, 3);
  a << 1, 0.9, -0.9, 0.9, 1, 0.9, -0.9, 0.9, 1;
  bool clipped = false;
  const Eigen::MatrixXd b = nearest_positive_definite(a, 1e-8, clipped);
  CHECK(clipped);
  CHECK((b.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(b).eigenvalues().minCoeff() > 0);
}

TEST_CASE("Fisher z test on a chain") {
  const CovMatrix s = true_covariance(LinearSem(WeightedDag(3, {{1, 2, 0.8}, {2, 3, 0.7}})));
  CHECK(fisher_z_ci(s, 10000, 1, 3, {2}, 0.01));
  CHECK_FALSE(fisher_z_ci(s, 10000, 1, 3, {}, 0.01));
  CHECK(fisher_z_ci(s, 10000, 3, 1, {2}, 0.01) == fisher_z_ci(s, 10000, 1, 3, {2}, 0.01));
  CHECK(fisher_z_ci(CovMatrix::with_default_labels(Eigen::MatrixXd::Identity(3, 3)), 50, 1, 2, {}, 0.999));
  CHECK_THROWS_AS(fisher_z_ci(s, 4, 1, 3, {2}, 0.01), InvalidInput);
  CHECK_THROWS_AS(fisher_z_ci(s, 100, 1, 1, {}, 0.01), InvalidInput);
  CHECK_THROWS_AS(fisher_z_ci(s, 100, 1, 3, {3}, 0.01), InvalidInput);
}

TEST_CASE("partial correlation matches residual correlation") {
  const CovMatrix s = true_covariance(random_linear_sem(5, 2.5, 31));
  const Eigen::MatrixXd& a = s.values();
  // rho_{12|3} by the recursive formula.
  const double r12 = a(0, 1) / std::sqrt(a(0, 0) * a(1, 1)), r13 = a(0, 2) / std::sqrt(a(0, 0) * a(2, 2)),
               r23 = a(1, 2) / std::sqrt(a(1, 1) * a(2, 2));
  const double expected = (r12 - r13 * r23) / std::sqrt((1 - r13 * r13) * (1 - r23 * r23));
  CHECK_THAT(partial_correlation(to_correlation(s), 1, 2, {3}), WithinAbs(expected, 1e-12));
}

TEST_CASE("PC on chain and collider data") {
  const DataMatrix chain = sample(LinearSem(WeightedDag(3, {{1, 2, 0.8}, {2, 3, 0.7}})), 20000, 1);
  CHECK(pc_cpdag(sample_covariance(chain), 20000) == chain_cpdag());
  const DataMatrix coll = sample(LinearSem(WeightedDag(3, {{1, 3, 0.8}, {2, 3, 0.7}})), 20000, 1);
  const Pdag g = pc_cpdag(sample_covariance(coll), 20000);
  CHECK(g.has_directed(1, 3));
  CHECK(g.has_directed(2, 3));
  CHECK_FALSE(g.adjacent(1, 2));
}

TEST_CASE("PC on population covariances recovers the CPDAG") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    std::mt19937_64 rng(seed);
    const int p = 4 + static_cast<int>(seed % 5);
    const LinearSem sem(random_weighted_dag(p, 2.0, rng, 0.3, 1.0));
    const Pdag c = pc_cpdag(true_covariance(sem), 1000000);
    CHECK(c == dag_to_cpdag(sem.graph().dag()));
  }
}

TEST_CASE("PC on sampled data is close to the true CPDAG") {
  // Some random SEMs carry dependencies too weak for a test of this size:
  // PC already misses them on the exact covariance at the same n. The 95%
  // rate is checked on the others; the overall rate is reported as well.
  int testable = 0, testable_good = 0, good = 0;
  const int runs = 100;
  for (int seed = 1; seed <= runs; ++seed) {
    const LinearSem sem = random_linear_sem(10, 2.0, static_cast<std::uint64_t>(seed));
    const Pdag truth = dag_to_cpdag(sem.graph().dag());
    const DataMatrix x = sample(sem, 50000, static_cast<std::uint64_t>(seed) + 500);
    const Pdag c = pc_cpdag(sample_covariance(x), x.rows());
    CHECK_FALSE(has_directed_cycle(c));
    CHECK_FALSE(meek_rule_applies(c));
    const bool close = structural_hamming_distance(c, truth) <= 1;
    good += close;
    if (pc_cpdag(true_covariance(sem), x.rows()) == truth) {
      ++testable;
      testable_good += close;
    }
  }
  INFO("overall " << good << "/" << runs << ", testable " << testable_good << "/" << testable);
  CHECK(testable_good >= 0.95 * testable);
  CHECK(good >= 80);
}

TEST_CASE("structural Hamming distance") {
  Pdag a = chain_cpdag();
  Pdag b = chain_cpdag();
  CHECK(structural_hamming_distance(a, b) == 0);
  b.orient(1, 2);
  b.remove_edge(2, 3);
  CHECK(structural_hamming_distance(a, b) == 2);
}

TEST_CASE("configuration checks") {
  CiTestConfig cfg;
  cfg.alpha = 1.5;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  CHECK(parse_corr_kind("kendall") == CorrKind::kendall);
  CHECK_THROWS_AS(parse_corr_kind("pearsons"), InvalidInput);
}
