#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dpm/ids.hpp"
#include "dpm/syntax.hpp"

namespace dpm {

enum class NodeKind : std::uint8_t { Root, Sum, Product, Indicator, Ref };

std::string_view nodeKindName(NodeKind k);

struct Node {
  NodeKind kind = NodeKind::Sum;
  NodeId owner;   // owning root; a root owns itself
  ValueId value;  // Indicator, Ref
  NodeId target;  // Ref: the referenced root
};

struct Edge {
  NodeId to;
  double weight = 1.0;
};

// Factored sum-product network. Node ids are dense and in insertion order.
// Each non-root node belongs to exactly one root; references point at
// (root, value) pairs whose probability is a variable of the system.
class Fspn {
 public:
  NodeId addRoot();
  NodeId addNode(NodeKind kind, NodeId owner, ValueId value = {}, NodeId target = {});
  void addEdge(NodeId from, NodeId to, double weight);

  [[nodiscard]] const Node& node(NodeId n) const { return nodes_[n.index]; }
  [[nodiscard]] const std::vector<Edge>& children(NodeId n) const { return edges_[n.index]; }
  [[nodiscard]] NodeId rootOf(NodeId n) const { return nodes_[n.index].owner; }
  [[nodiscard]] std::size_t nodeCount() const { return nodes_.size(); }
  [[nodiscard]] std::size_t edgeCount() const { return edgeCount_; }
  [[nodiscard]] std::size_t rootCount() const { return roots_.size(); }
  [[nodiscard]] const std::vector<NodeId>& roots() const { return roots_; }
  [[nodiscard]] NodeId globalRoot() const { return roots_.empty() ? NodeId{} : roots_.front(); }

 private:
  std::vector<Node> nodes_;
  std::vector<std::vector<Edge>> edges_;
  std::vector<NodeId> roots_;
  std::size_t edgeCount_ = 0;
};

using RefValues = std::map<std::pair<NodeId, ValueId>, double>;

// Value of node `y` when its owning root is asked for `selected`: sums are
// weighted sums, products multiply, indicators test the selected value and
// references read `refs`. Memoized over the reachable subgraph.
double evaluate(const Fspn& g, NodeId y, ValueId selected, const RefValues& refs);

// Marginal over return values. Probabilities are clamped at zero on output.
struct Distribution {
  std::vector<std::pair<ValueId, double>> mass;
  double totalMass = 0.0;

  [[nodiscard]] double probability(ValueId v) const;
};

std::string emitDot(const Fspn& g, const Store& store);
std::string emitJson(const Fspn& g, const Store& store);

}  // namespace dpm
