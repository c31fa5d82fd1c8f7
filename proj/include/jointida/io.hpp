#pragma once

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "jointida/asymptotics.hpp"
#include "jointida/graph.hpp"
#include "jointida/parentsets.hpp"
#include "jointida/pipeline.hpp"
#include "jointida/sem.hpp"

namespace jointida {

// Graph text format:
//   p <num_nodes>
//   i -> j [w]      directed edge, weight defaults to 1
//   i -- j          undirected edge
//   errors:         optional block, one line per node:
//   i gaussian v | i uniform v | i t v df
// '#' starts a comment; blank lines are ignored.

struct GraphSpec {
  int p = 0;
  std::vector<WeightedEdge> directed;
  std::vector<Edge> undirected;
  std::vector<ErrorSpec> errors;  // empty unless an errors block was given

  Pdag pdag() const {
    Pdag g(p);
    for (const auto& e : directed) g.add_directed(e.from, e.to);
    for (auto [i, j] : undirected) g.add_undirected(i, j);
    return g;
  }
  WeightedDag weighted_dag() const {
    if (!undirected.empty()) throw InvalidInput("graph file", "a weighted DAG cannot contain undirected edges");
    return WeightedDag(p, directed);
  }
  LinearSem sem() const {
    if (errors.empty()) return LinearSem(weighted_dag());
    return LinearSem(weighted_dag(), errors);
  }
};

namespace detail {

inline double parse_double(const std::string& s, const std::string& stage, int line) {
  double v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v))
    throw InvalidInput(stage, "line " + std::to_string(line) + ": not a number: '" + s + "'");
  return v;
}

inline int parse_int(const std::string& s, const std::string& stage, int line) {
  int v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw InvalidInput(stage, "line " + std::to_string(line) + ": not an integer: '" + s + "'");
  return v;
}

inline std::vector<std::string> tokens(const std::string& line) {
  std::istringstream is(line.substr(0, line.find('#')));
  std::vector<std::string> out;
  for (std::string t; is >> t;) out.push_back(t);
  return out;
}

}  // namespace detail

inline GraphSpec read_graph(std::istream& in) {
  const std::string stage = "graph file";
  GraphSpec spec;
  std::vector<std::pair<Node, Node>> seen;
  std::vector<bool> has_error;
  bool in_errors = false;
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    const auto t = detail::tokens(line);
    if (t.empty()) continue;
    auto where = [&] { return "line " + std::to_string(lineno) + ": "; };
    if (spec.p == 0) {
      if (t.size() != 2 || t[0] != "p") throw InvalidInput(stage, where() + "expected 'p <num_nodes>' first");
      spec.p = detail::parse_int(t[1], stage, lineno);
      if (spec.p < 1) throw InvalidInput(stage, where() + "number of nodes must be positive");
      has_error.assign(spec.p + 1, false);
      continue;
    }
    auto node = [&](const std::string& s) {
      const int v = detail::parse_int(s, stage, lineno);
      if (v < 1 || v > spec.p) throw InvalidInput(stage, where() + "node " + s + " out of range");
      return v;
    };
    if (t.size() == 1 && t[0] == "errors:") {
      in_errors = true;
      continue;
    }
    if (in_errors) {
      const Node v = node(t[0]);
      if (has_error[v]) throw InvalidInput(stage, where() + "second error specification for node " + t[0]);
      ErrorSpec e;
      if (t.size() == 3 && t[1] == "gaussian") {
        e = {ErrorFamily::gaussian, detail::parse_double(t[2], stage, lineno), 0};
      } else if (t.size() == 3 && t[1] == "uniform") {
        e = {ErrorFamily::uniform, detail::parse_double(t[2], stage, lineno), 0};
      } else if (t.size() == 4 && t[1] == "t") {
        e = {ErrorFamily::student_t, detail::parse_double(t[2], stage, lineno), detail::parse_double(t[3], stage, lineno)};
      } else {
        throw InvalidInput(stage, where() + "expected '<node> gaussian|uniform <var>' or '<node> t <var> <df>'");
      }
      e.validate();
      if (spec.errors.empty()) spec.errors.resize(static_cast<std::size_t>(spec.p));
      spec.errors[v - 1] = e;
      has_error[v] = true;
      continue;
    }
    if (t.size() < 3 || (t[1] != "->" && t[1] != "--")) throw InvalidInput(stage, where() + "expected 'i -> j [w]' or 'i -- j'");
    const Node i = node(t[0]), j = node(t[2]);
    if (i == j) throw InvalidInput(stage, where() + "self-loop at node " + t[0]);
    const auto key = std::minmax(i, j);
    if (std::find(seen.begin(), seen.end(), std::pair<Node, Node>(key.first, key.second)) != seen.end())
      throw InvalidInput(stage, where() + "second edge between " + t[0] + " and " + t[2]);
    seen.emplace_back(key.first, key.second);
    if (t[1] == "->") {
      if (t.size() > 4) throw InvalidInput(stage, where() + "trailing tokens");
      spec.directed.push_back({i, j, t.size() == 4 ? detail::parse_double(t[3], stage, lineno) : 1.0});
    } else {
      if (t.size() != 3) throw InvalidInput(stage, where() + "undirected edges take no weight");
      spec.undirected.emplace_back(i, j);
    }
  }
  if (spec.p == 0) throw InvalidInput(stage, "empty graph file");
  if (!spec.errors.empty())
    for (Node v = 1; v <= spec.p; ++v)
      if (!has_error[v]) throw InvalidInput(stage, "errors block misses node " + std::to_string(v));
  return spec;
}

inline std::string format_double(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

inline void write_graph(std::ostream& out, const Pdag& g) {
  out << "p " << g.num_nodes() << '\n';
  for (auto [i, j] : g.directed_edges()) out << i << " -> " << j << '\n';
  for (auto [i, j] : g.undirected_edges()) out << i << " -- " << j << '\n';
}

inline void write_sem(std::ostream& out, const LinearSem& sem) {
  out << "p " << sem.num_nodes() << '\n';
  for (const auto& e : sem.graph().weighted_edges()) out << e.from << " -> " << e.to << ' ' << format_double(e.weight) << '\n';
  out << "errors:\n";
  for (int v = 1; v <= sem.num_nodes(); ++v) {
    const ErrorSpec& e = sem.errors()[v - 1];
    out << v << ' ' << (e.family == ErrorFamily::student_t ? "t" : to_string(e.family)) << ' ' << format_double(e.variance);
    if (e.family == ErrorFamily::student_t) out << ' ' << format_double(e.df);
    out << '\n';
  }
}

/// CSV with a header row; every cell must be a finite number.
inline DataMatrix read_csv(std::istream& in) {
  const std::string stage = "csv";
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput(stage, "empty file");
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(s);
    while (std::getline(is, cell, ',')) {
      const auto a = cell.find_first_not_of(" \t\r");
      const auto b = cell.find_last_not_of(" \t\r");
      out.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
    }
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  const std::size_t p = split(line).size();
  if (p == 0) throw InvalidInput(stage, "header has no columns");
  for (const auto& h : split(line))
    if (h.empty()) throw InvalidInput(stage, "empty column name in header");
  std::vector<double> values;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (cells.size() != p)
      throw InvalidInput(stage, "line " + std::to_string(lineno) + ": expected " + std::to_string(p) + " fields");
    for (std::size_t c = 0; c < p; ++c) {
      if (cells[c].empty() || cells[c] == "NA" || cells[c] == "NaN")
        throw InvalidInput(stage, "line " + std::to_string(lineno) + ": missing value in column " + std::to_string(c + 1));
      values.push_back(detail::parse_double(cells[c], stage, lineno));
    }
  }
  const auto n = static_cast<Eigen::Index>(values.size() / p);
  if (n == 0) throw InvalidInput(stage, "no data rows");
  DataMatrix data(n, static_cast<Eigen::Index>(p));
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < data.cols(); ++c) data(r, c) = values[static_cast<std::size_t>(r * data.cols() + c)];
  return data;
}

inline void write_csv(std::ostream& out, const DataMatrix& data) {
  for (Eigen::Index c = 0; c < data.cols(); ++c) out << (c ? "," : "") << 'X' << c + 1;
  out << '\n';
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.cols(); ++c) out << (c ? "," : "") << format_double(data(r, c));
    out << '\n';
  }
}

// JSON documents.

using nlohmann::json;

inline json to_json(const std::vector<NodeSet>& tuple) {
  json a = json::array();
  for (const auto& s : tuple) a.push_back(s);
  return a;
}

inline json to_json(const EffectVector& e, Method m, const std::vector<NodeSet>& parent_sets) {
  return {{"targets", e.targets}, {"response", e.response}, {"method", to_string(m)}, {"values", e.values},
          {"parent_sets", to_json(parent_sets)}};
}

inline json to_json(const AsymptoticResult& r, Method m, const std::vector<NodeSet>& parent_sets) {
  json j = to_json(r.estimate, m, parent_sets);
  json cov = json::array();
  for (Eigen::Index a = 0; a < r.limit_covariance.rows(); ++a) {
    std::vector<double> row(static_cast<std::size_t>(r.limit_covariance.cols()));
    for (Eigen::Index b = 0; b < r.limit_covariance.cols(); ++b) row[static_cast<std::size_t>(b)] = r.limit_covariance(a, b);
    cov.push_back(row);
  }
  j["limit_covariance"] = cov;
  j["n"] = r.n;
  return j;
}

inline json to_json(const ParentMultiset& m) {
  json entries = json::array();
  for (const auto& [tuple, count] : m.entries) entries.push_back({{"parent_sets", to_json(tuple)}, {"multiplicity", count}});
  return {{"targets", m.targets}, {"entries", entries}, {"superset", m.superset}};
}

inline json graph_metadata(double alpha, Eigen::Index n, bool clipped) {
  return {{"alpha", alpha}, {"n", n}, {"test", "fisher_z"}, {"clipped", clipped}};
}

inline json to_json(const EffectMultiset& m) {
  json entries = json::array();
  for (const auto& e : m.entries)
    entries.push_back({{"values", e.values}, {"multiplicity", e.multiplicity}, {"parent_sets", to_json(e.parent_sets)}});
  return entries;
}

/// Result document of the end-to-end estimator.
inline json joint_ida_document(const EffectMultiset& m, CorrKind corr, double alpha, const std::string& graph_ref) {
  std::vector<double> minabs, aver;
  for (std::size_t q = 0; q < m.dimension() && !m.entries.empty(); ++q) {
    minabs.push_back(summarize(m, q, Summary::minabs));
    aver.push_back(summarize(m, q, Summary::aver));
  }
  json doc = {{"targets", m.targets},
              {"response", m.response},
              {"method", to_string(m.method)},
              {"corr_kind", to_string(corr)},
              {"alpha", alpha},
              {"multiset", to_json(m)},
              {"summaries", {{"minabs", minabs}, {"aver", aver}}},
              {"superset", m.superset}};
  doc["learned_graph_ref"] = graph_ref.empty() ? json(nullptr) : json(graph_ref);
  return doc;
}

}  // namespace jointida
