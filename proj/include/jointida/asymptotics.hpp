#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "jointida/opin.hpp"

namespace jointida {

/// Delta-method limit law of sqrt(n) (estimate - effect) for a double
/// intervention.
struct AsymptoticResult {
  EffectVector estimate;
  Eigen::MatrixXd limit_covariance;  // 2 x 2
  Eigen::Index n = 0;
};

/// Half-vectorization: lower triangle stacked column by column.
inline Eigen::VectorXd vech(const Eigen::MatrixXd& a) {
  const Eigen::Index q = a.rows();
  Eigen::VectorXd v(q * (q + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index c = 0; c < q; ++c)
    for (Eigen::Index r = c; r < q; ++r) v(k++) = a(r, c);
  return v;
}

inline Eigen::MatrixXd unvech(const Eigen::VectorXd& v, Eigen::Index q) {
  Eigen::MatrixXd a(q, q);
  Eigen::Index k = 0;
  for (Eigen::Index c = 0; c < q; ++c)
    for (Eigen::Index r = c; r < q; ++r) a(r, c) = a(c, r) = v(k++);
  return a;
}

/// Central finite-difference Jacobian with step max(1e-5, 1e-5 |x_j|).
inline Eigen::MatrixXd numerical_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd jac(f0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = std::max(1e-5, 1e-5 * std::abs(x(j)));
    Eigen::VectorXd up = x, down = x;
    up(j) += h;
    down(j) -= h;
    jac.col(j) = (f(up) - f(down)) / (2.0 * h);
  }
  return jac;
}

/// Estimated limit covariance of sqrt(n)(theta_hat - theta) for RRC or MCD
/// with two targets. Gamma, the covariance of vech(U U^T), is estimated
/// from the centred rows; the Jacobians of the estimator maps are taken
/// numerically at the sample covariance of U.
inline AsymptoticResult asymptotic_variance(const DataMatrix& data, Method method, const ParentAssignment& pa,
                                            Node response) {
  pa.validate();
  if (pa.size() != 2) throw InvalidInput("asymptotic variance", "exactly two targets are required");
  const NodeSet all_parents = set_union(pa.parent_sets[0], pa.parent_sets[1]);
  if (contains(all_parents, response))
    throw InvalidInput("asymptotic variance", "response is a parent of an intervention node");
  if (method == Method::rrc && (contains(all_parents, pa.targets[0]) || contains(all_parents, pa.targets[1])))
    throw InvalidInput("asymptotic variance", "RRC limit law needs targets outside both parent sets");
  const Eigen::Index n = data.rows();
  if (n < 3) throw InvalidInput("asymptotic variance", "need at least 3 observations");

  const NodeSet u = set_union(pa.involved(), {response});
  std::vector<Eigen::Index> cols;
  for (Node v : u) {
    if (v < 1 || v > data.cols()) throw InvalidInput("asymptotic variance", "no data column for node " + std::to_string(v));
    cols.push_back(v - 1);
  }
  const auto q = static_cast<Eigen::Index>(u.size());
  Eigen::MatrixXd centred = data(Eigen::all, cols);
  centred.rowwise() -= centred.colwise().mean();
  const Eigen::MatrixXd sigma = centred.transpose() * centred / static_cast<double>(n - 1);

  const Eigen::Index m = q * (q + 1) / 2;
  Eigen::MatrixXd products(n, m);
  for (Eigen::Index r = 0; r < n; ++r) {
    Eigen::Index k = 0;
    for (Eigen::Index c = 0; c < q; ++c)
      for (Eigen::Index s = c; s < q; ++s) products(r, k++) = centred(r, s) * centred(r, c);
  }
  products.rowwise() -= products.colwise().mean();
  const Eigen::MatrixXd gamma = products.transpose() * products / static_cast<double>(n - 1);

  const std::vector<Node> labels(u.begin(), u.end());
  auto as_cov = [&](const Eigen::VectorXd& v) { return CovMatrix(labels, unvech(v, q)); };
  const Eigen::VectorXd x0 = vech(sigma);

  AsymptoticResult out;
  out.n = n;
  out.estimate = opin_effect(method, CovMatrix(labels, sigma), pa, response);

  const Node t1 = pa.targets[0], t2 = pa.targets[1];
  if (method == Method::rrc) {
    // Single-intervention effects (theta_1p, theta_2p, theta_12, theta_21).
    auto singles = [&](const Eigen::VectorXd& v) {
      const CovMatrix c = as_cov(v);
      Eigen::VectorXd t(4);
      t << adjusted_effect(c, t1, response, pa.parent_sets[0]), adjusted_effect(c, t2, response, pa.parent_sets[1]),
          adjusted_effect(c, t1, t2, pa.parent_sets[0]), adjusted_effect(c, t2, t1, pa.parent_sets[1]);
      return t;
    };
    auto combine = [](const Eigen::VectorXd& t) {
      Eigen::VectorXd j(2);
      j << t(0) - t(2) * t(1), t(1) - t(3) * t(0);
      return j;
    };
    const Eigen::MatrixXd lambda = numerical_jacobian(singles, x0);
    const Eigen::MatrixXd f = numerical_jacobian(combine, singles(x0));
    const Eigen::MatrixXd fl = f * lambda;
    out.limit_covariance = fl * gamma * fl.transpose();
  } else {
    auto step = [&](Node target, const NodeSet& parents) {
      return [&, target, parents](const Eigen::VectorXd& v) {
        return vech(detail::modify_mechanism(as_cov(v), target, parents, {}, "mcd").values());
      };
    };
    auto ratios = [&](const Eigen::VectorXd& v) {
      const CovMatrix c = as_cov(v);
      Eigen::VectorXd j(2);
      j << c(t1, response) / c(t1, t1), c(t2, response) / c(t2, t2);
      return j;
    };
    const Eigen::VectorXd x1 = step(t1, pa.parent_sets[0])(x0);
    const Eigen::VectorXd x2 = step(t2, pa.parent_sets[1])(x1);
    const Eigen::MatrixXd lambda1 = numerical_jacobian(step(t1, pa.parent_sets[0]), x0);
    const Eigen::MatrixXd lambda2 = numerical_jacobian(step(t2, pa.parent_sets[1]), x1);
    const Eigen::MatrixXd h = numerical_jacobian(ratios, x2);
    const Eigen::MatrixXd chain = h * lambda2 * lambda1;
    out.limit_covariance = chain * gamma * chain.transpose();
  }
  return out;
}

}  // namespace jointida
