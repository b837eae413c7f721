#include "dpm/fspn.hpp"

#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace dpm {

std::string_view nodeKindName(NodeKind k) {
  switch (k) {
    case NodeKind::Root: return "root";
    case NodeKind::Sum: return "sum";
    case NodeKind::Product: return "product";
    case NodeKind::Indicator: return "indicator";
    case NodeKind::Ref: return "ref";
  }
  return "?";
}

NodeId Fspn::addRoot() {
  NodeId id(static_cast<std::uint32_t>(nodes_.size()));
  nodes_.push_back({NodeKind::Root, id, {}, {}});
  edges_.emplace_back();
  roots_.push_back(id);
  return id;
}

NodeId Fspn::addNode(NodeKind kind, NodeId owner, ValueId value, NodeId target) {
  if (kind == NodeKind::Root) return addRoot();
  if (!owner.valid() || owner.index >= nodes_.size() || nodes_[owner.index].kind != NodeKind::Root) {
    throw GraphError("node owner must be an existing root");
  }
  if (kind == NodeKind::Ref && (!target.valid() || target.index >= nodes_.size() ||
                                nodes_[target.index].kind != NodeKind::Root)) {
    throw GraphError("reference target must be an existing root");
  }
  NodeId id(static_cast<std::uint32_t>(nodes_.size()));
  nodes_.push_back({kind, owner, value, target});
  edges_.emplace_back();
  return id;
}

void Fspn::addEdge(NodeId from, NodeId to, double weight) {
  if (from.index >= nodes_.size() || to.index >= nodes_.size()) throw GraphError("edge endpoint does not exist");
  NodeKind k = nodes_[from.index].kind;
  if (k == NodeKind::Indicator || k == NodeKind::Ref) {
    throw GraphError("indicator and reference nodes are sinks");
  }
  if (!(weight >= 0.0 && weight <= 1.0)) throw GraphError("edge weight outside [0, 1]");
  edges_[from.index].push_back({to, weight});
  ++edgeCount_;
}

double evaluate(const Fspn& g, NodeId y, ValueId selected, const RefValues& refs) {
  std::vector<double> memo(g.nodeCount(), 0.0);
  std::vector<std::uint8_t> state(g.nodeCount(), 0);  // 0 new, 1 open, 2 done
  std::vector<NodeId> stack{y};
  while (!stack.empty()) {
    NodeId n = stack.back();
    if (state[n.index] == 2) {
      stack.pop_back();
      continue;
    }
    const Node& node = g.node(n);
    if (state[n.index] == 0) {
      state[n.index] = 1;
      for (const Edge& e : g.children(n)) {
        if (state[e.to.index] == 0) stack.push_back(e.to);
      }
      continue;
    }
    stack.pop_back();
    double value = 0.0;
    switch (node.kind) {
      case NodeKind::Root:
      case NodeKind::Sum:
        for (const Edge& e : g.children(n)) value += e.weight * memo[e.to.index];
        break;
      case NodeKind::Product:
        value = 1.0;
        for (const Edge& e : g.children(n)) value *= memo[e.to.index];
        break;
      case NodeKind::Indicator:
        value = node.value == selected ? 1.0 : 0.0;
        break;
      case NodeKind::Ref: {
        auto it = refs.find({node.target, node.value});
        if (it == refs.end()) {
          throw MissingReference("no value supplied for reference to root " + std::to_string(node.target.index));
        }
        value = it->second;
        break;
      }
    }
    memo[n.index] = value;
    state[n.index] = 2;
  }
  return memo[y.index];
}

double Distribution::probability(ValueId v) const {
  for (const auto& [value, p] : mass) {
    if (value == v) return p;
  }
  return 0.0;
}

namespace {

std::string formatWeight(double w) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", w);
  return buf;
}

std::string dotEscape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

std::string nodeLabel(const Fspn& g, const Store& store, NodeId n) {
  const Node& node = g.node(n);
  switch (node.kind) {
    case NodeKind::Root: return "root " + std::to_string(n.index);
    case NodeKind::Sum: return "+";
    case NodeKind::Product: return "*";
    case NodeKind::Indicator: return "[" + store.show(node.value) + "]";
    case NodeKind::Ref: return "P(" + std::to_string(node.target.index) + "=" + store.show(node.value) + ")";
  }
  return "?";
}

}  // namespace

std::string emitDot(const Fspn& g, const Store& store) {
  std::ostringstream out;
  out << "digraph fspn {\n";
  for (std::uint32_t i = 0; i < g.nodeCount(); ++i) {
    NodeId n(i);
    const char* shape = "ellipse";
    switch (g.node(n).kind) {
      case NodeKind::Root: shape = "doublecircle"; break;
      case NodeKind::Indicator: shape = "box"; break;
      case NodeKind::Ref: shape = "box"; break;
      default: break;
    }
    out << "  n" << i << " [label=\"" << dotEscape(nodeLabel(g, store, n)) << "\", shape=" << shape << "];\n";
  }
  for (std::uint32_t i = 0; i < g.nodeCount(); ++i) {
    for (const Edge& e : g.children(NodeId(i))) {
      out << "  n" << i << " -> n" << e.to.index << " [label=\"" << formatWeight(e.weight) << "\"];\n";
    }
  }
  out << "}\n";
  return out.str();
}

std::string emitJson(const Fspn& g, const Store& store) {
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  nlohmann::ordered_json edges = nlohmann::ordered_json::array();
  for (std::uint32_t i = 0; i < g.nodeCount(); ++i) {
    const Node& node = g.node(NodeId(i));
    nlohmann::ordered_json j;
    j["id"] = i;
    j["kind"] = nodeKindName(node.kind);
    if (node.kind == NodeKind::Indicator || node.kind == NodeKind::Ref) j["value"] = store.show(node.value);
    if (node.kind == NodeKind::Ref) j["root"] = node.target.index;
    nodes.push_back(std::move(j));
    for (const Edge& e : g.children(NodeId(i))) {
      edges.push_back({{"from", i}, {"to", e.to.index}, {"w", e.weight}});
    }
  }
  nlohmann::ordered_json doc;
  doc["nodes"] = std::move(nodes);
  doc["edges"] = std::move(edges);
  doc["globalRoot"] = g.globalRoot().index;
  return doc.dump();
}

}  // namespace dpm
