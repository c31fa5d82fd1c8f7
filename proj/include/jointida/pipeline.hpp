#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "jointida/learn.hpp"
#include "jointida/opin.hpp"
#include "jointida/parallel.hpp"
#include "jointida/parentsets.hpp"

namespace jointida {

struct EffectEntry {
  std::vector<double> values;
  std::uint64_t multiplicity = 1;
  std::vector<NodeSet> parent_sets;  // tuple that produced the values
};

/// Multiset of possible joint effects, one entry per parent tuple, in the
/// tuple order of the parent multiset it came from.
struct EffectMultiset {
  std::vector<Node> targets;
  Node response = 0;
  Method method = Method::rrc;
  std::vector<EffectEntry> entries;
  bool superset = false;

  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (const auto& e : entries) n += e.multiplicity;
    return n;
  }
  std::size_t dimension() const { return entries.empty() ? targets.size() : entries.front().values.size(); }
};

/// Applies an OPIN estimator to every tuple of `pa`.
inline EffectMultiset effects_from_parents(const CovMatrix& cov, const ParentMultiset& pa, Node response, Method method,
                                           unsigned threads = 1) {
  for (Node t : pa.targets)
    if (t == response) throw InvalidInput("joint-ida", "response must not be a target");
  EffectMultiset out{pa.targets, response, method, {}, pa.superset};
  std::vector<std::pair<const std::vector<NodeSet>*, std::uint64_t>> tuples;
  for (const auto& [tuple, count] : pa.entries) tuples.emplace_back(&tuple, count);
  out.entries.resize(tuples.size());
  parallel_for(tuples.size(), threads, [&](std::size_t k) {
    const ParentAssignment a(pa.targets, *tuples[k].first);
    out.entries[k] = {opin_effect(method, cov, a, response).values, tuples[k].second, *tuples[k].first};
  });
  return out;
}

/// Known-CPDAG regime: parent tuples from the semi-local extraction on `c`,
/// effects from `cov`.
inline EffectMultiset joint_ida_known_graph(const CovMatrix& cov, const Pdag& c, const std::vector<Node>& targets,
                                            Node response, Method method, std::size_t max_enum = 12,
                                            unsigned threads = 1) {
  detail::check_targets(c.num_nodes(), targets, response, "joint-ida");
  return effects_from_parents(cov, jointly_valid_parent_sets(c, targets, max_enum), response, method, threads);
}

struct JointIdaConfig {
  Method method = Method::rrc;
  CiTestConfig ci;
  CorrKind corr_kind = CorrKind::pearson;
  std::size_t max_enum = 12;
  unsigned threads = 1;
};

struct JointIdaResult {
  EffectMultiset effects;
  Pdag graph;         // estimated CPDAG
  CovMatrix scatter;  // matrix the effects were computed from
  Eigen::Index n = 0;
  bool clipped = false;
};

/// Learn the CPDAG, extract jointly valid parent tuples, estimate each
/// tuple's joint effect. Pearson runs on the sample covariance; Spearman or
/// Kendall on the sine-transformed rank correlation, so effects are on the
/// latent Gaussian scale.
inline JointIdaResult joint_ida(const DataMatrix& data, const std::vector<Node>& targets, Node response,
                                const JointIdaConfig& cfg = {}) {
  cfg.ci.validate();
  detail::check_targets(static_cast<int>(data.cols()), targets, response, "joint-ida");
  JointIdaResult out;
  out.n = data.rows();
  if (cfg.corr_kind == CorrKind::pearson) {
    out.scatter = sample_covariance(data);
  } else {
    RankCorrelation r = rank_correlation_matrix(data, cfg.corr_kind);
    out.scatter = std::move(r.corr);
    out.clipped = r.clipped;
  }
  out.graph = pc_cpdag(out.scatter, out.n, cfg.ci);
  out.effects = joint_ida_known_graph(out.scatter, out.graph, targets, response, cfg.method, cfg.max_enum, cfg.threads);
  return out;
}

namespace detail {

// Coordinate q of every entry as (value, multiplicity), sorted by value.
inline std::vector<std::pair<double, std::uint64_t>> coordinate(const EffectMultiset& m, std::size_t q) {
  std::vector<std::pair<double, std::uint64_t>> out;
  for (const auto& e : m.entries) out.emplace_back(e.values.at(q), e.multiplicity);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// Sup-distance between the sorted elements, elements counted with their
/// multiplicities; infinite when the sizes differ. For more than one
/// coordinate the maximum over coordinates is taken.
inline double multiset_distance(const EffectMultiset& a, const EffectMultiset& b) {
  if (a.total() != b.total()) return std::numeric_limits<double>::infinity();
  if (a.dimension() != b.dimension()) throw InvalidInput("distance", "multisets differ in dimension");
  double d = 0.0;
  for (std::size_t q = 0; q < a.dimension(); ++q) {
    const auto x = detail::coordinate(a, q), y = detail::coordinate(b, q);
    std::size_t i = 0, j = 0;
    std::uint64_t left_x = x.empty() ? 0 : x[0].second, left_y = y.empty() ? 0 : y[0].second;
    while (i < x.size() && j < y.size()) {
      d = std::max(d, std::abs(x[i].first - y[j].first));
      const std::uint64_t step = std::min(left_x, left_y);
      left_x -= step;
      left_y -= step;
      if (left_x == 0 && ++i < x.size()) left_x = x[i].second;
      if (left_y == 0 && ++j < y.size()) left_y = y[j].second;
    }
  }
  return d;
}

enum class Summary { minabs, aver };

inline std::string to_string(Summary s) { return s == Summary::minabs ? "minabs" : "aver"; }

/// minabs or multiplicity-weighted mean of coordinate `index` (0-based).
inline double summarize(const EffectMultiset& m, std::size_t index, Summary stat) {
  if (m.entries.empty()) throw InvalidInput("summary", "empty multiset");
  if (index >= m.dimension()) throw InvalidInput("summary", "coordinate index out of range");
  if (stat == Summary::minabs) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : m.entries) best = std::min(best, std::abs(e.values[index]));
    return best;
  }
  long double sum = 0;
  std::uint64_t count = 0;
  for (const auto& e : m.entries) {
    sum += static_cast<long double>(e.values[index]) * e.multiplicity;
    count += e.multiplicity;
  }
  return static_cast<double>(sum / count);
}

/// Equivalence up to multiplicity ratios, values compared within `tol`.
inline bool multisets_equivalent(const EffectMultiset& a, const EffectMultiset& b, double tol = 0.0) {
  auto merge = [tol](const EffectMultiset& m) {
    std::vector<std::pair<std::vector<double>, std::uint64_t>> groups;
    for (const auto& e : m.entries) {
      auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) {
        for (std::size_t q = 0; q < g.first.size(); ++q)
          if (std::abs(g.first[q] - e.values[q]) > tol) return false;
        return true;
      });
      if (it == groups.end())
        groups.emplace_back(e.values, e.multiplicity);
      else
        it->second += e.multiplicity;
    }
    return groups;
  };
  const auto ga = merge(a), gb = merge(b);
  if (ga.size() != gb.size()) return false;
  if (ga.empty()) return true;
  std::vector<bool> used(gb.size(), false);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> counts;
  for (const auto& [values, count] : ga) {
    bool matched = false;
    for (std::size_t k = 0; k < gb.size() && !matched; ++k) {
      if (used[k] || gb[k].first.size() != values.size()) continue;
      bool close = true;
      for (std::size_t q = 0; q < values.size(); ++q) close = close && std::abs(gb[k].first[q] - values[q]) <= tol;
      if (close) {
        used[k] = matched = true;
        counts.emplace_back(count, gb[k].second);
      }
    }
    if (!matched) return false;
  }
  for (const auto& [x, y] : counts)
    if (static_cast<unsigned __int128>(x) * counts[0].second != static_cast<unsigned __int128>(y) * counts[0].first)
      return false;
  return true;
}

/// Per parent tuple: joint effects of (i, j) minus the single-intervention
/// effects under the same parent sets, summed over both targets.
inline EffectMultiset epistasis_from_parents(const CovMatrix& cov, const ParentMultiset& pa, Node response, Method method) {
  if (pa.targets.size() != 2) throw InvalidInput("epistasis", "exactly two targets are required");
  EffectMultiset joint = effects_from_parents(cov, pa, response, method);
  for (auto& e : joint.entries) {
    const double single = adjusted_effect(cov, pa.targets[0], response, e.parent_sets[0]) +
                          adjusted_effect(cov, pa.targets[1], response, e.parent_sets[1]);
    e.values = {e.values[0] + e.values[1] - single};
  }
  return joint;
}

/// Epistasis scores with the parent tuples learned from data.
inline EffectMultiset epistasis_score(const DataMatrix& data, Node i, Node j, Node response, const JointIdaConfig& cfg = {}) {
  const JointIdaResult r = joint_ida(data, {i, j}, response, cfg);
  ParentMultiset pa{{i, j}, {}, r.effects.superset};
  for (const auto& e : r.effects.entries) pa.add(e.parent_sets, e.multiplicity);
  return epistasis_from_parents(r.scatter, pa, response, cfg.method);
}

}  // namespace jointida
