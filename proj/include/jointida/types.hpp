#pragma once

#include <algorithm>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace jointida {

/// Node label. Nodes are numbered 1..p throughout the library.
using Node = int;

/// Sorted, duplicate-free list of node labels.
using NodeSet = std::vector<Node>;

inline NodeSet make_node_set(std::vector<Node> nodes) {
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return nodes;
}

inline NodeSet make_node_set(std::initializer_list<Node> nodes) {
  return make_node_set(std::vector<Node>(nodes));
}

inline bool contains(const NodeSet& set, Node v) {
  return std::binary_search(set.begin(), set.end(), v);
}

inline NodeSet set_union(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline NodeSet set_difference(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline std::string format_nodes(const std::vector<Node>& nodes) {
  std::ostringstream os;
  os << '{';
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (k) os << ',';
    os << nodes[k];
  }
  os << '}';
  return os.str();
}

// Errors. Every failure names the stage that raised it; numerical failures
// also carry the offending node labels.

class Error : public std::runtime_error {
 public:
  Error(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Violated precondition or malformed input.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Loss of positive definiteness, singular blocks, failed factorizations.
class NumericalError : public Error {
 public:
  NumericalError(std::string stage, const std::string& what, std::vector<Node> nodes = {})
      : Error(std::move(stage), nodes.empty() ? what : what + " (nodes " + format_nodes(nodes) + ")"),
        nodes_(std::move(nodes)) {}
  const std::vector<Node>& nodes() const noexcept { return nodes_; }

 private:
  std::vector<Node> nodes_;
};

}  // namespace jointida
