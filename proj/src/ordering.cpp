#include "bugsmc/ordering.hpp"

#include <queue>
#include <sstream>
#include <tuple>

namespace bugsmc {

namespace {

enum Priority { kObserved = 0, kKnown = 1, kLatent = 2 };

std::vector<bool> normalized(const Graph& graph, const std::vector<bool>& fixed) {
  if (fixed.empty()) return std::vector<bool>(graph.size(), false);
  if (fixed.size() != graph.size()) throw Error("fixed-node mask has the wrong size");
  return fixed;
}

Priority priority(const Node& n, bool fixed) {
  if (n.kind != NodeKind::Stochastic || fixed) return kKnown;
  return n.observed ? kObserved : kLatent;
}

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::vector<NodeId> topological_sort_prioritized(const Graph& graph,
                                                 const std::vector<bool>& fixed_in) {
  const auto fixed = normalized(graph, fixed_in);
  std::vector<std::size_t> indeg(graph.size());
  using Key = std::tuple<int, NodeId>;
  std::priority_queue<Key, std::vector<Key>, std::greater<>> ready;
  for (const auto& n : graph.nodes()) {
    indeg[n.id] = n.parents.size();
    if (indeg[n.id] == 0) ready.emplace(priority(n, fixed[n.id]), n.id);
  }
  std::vector<NodeId> order;
  order.reserve(graph.size());
  while (!ready.empty()) {
    const NodeId v = std::get<1>(ready.top());
    ready.pop();
    order.push_back(v);
    for (NodeId c : graph.children(v))
      if (--indeg[c] == 0) ready.emplace(priority(graph.node(c), fixed[c]), c);
  }
  if (order.size() != graph.size()) throw CompileError("graph contains a cycle");
  return order;
}

Arrangement group_nodes(const std::vector<NodeId>& sorted, const Graph& graph,
                        const std::vector<bool>& fixed_in) {
  Arrangement arr;
  arr.fixed = normalized(graph, fixed_in);
  std::vector<NodeId> leading_observed, leading_ops;
  for (NodeId id : sorted) {
    const Node& n = graph.node(id);
    if (arr.fixed[id] || n.kind == NodeKind::Constant) continue;
    if (n.is_latent()) {
      if (arr.steps.empty() || !arr.steps.back().observed.empty()) arr.steps.emplace_back();
      arr.steps.back().latent.push_back(id);
      arr.steps.back().ops.push_back(id);
    } else if (arr.steps.empty()) {
      // Nothing latent yet: these attach to the first step.
      if (n.observed) leading_observed.push_back(id);
      leading_ops.push_back(id);
    } else {
      if (n.observed) arr.steps.back().observed.push_back(id);
      arr.steps.back().ops.push_back(id);
    }
  }
  if (arr.steps.empty()) arr.steps.emplace_back();
  Step& first = arr.steps.front();
  first.observed.insert(first.observed.begin(), leading_observed.begin(), leading_observed.end());
  first.ops.insert(first.ops.begin(), leading_ops.begin(), leading_ops.end());
  return arr;
}

Arrangement arrange(const Graph& graph, const std::vector<bool>& fixed) {
  return group_nodes(topological_sort_prioritized(graph, fixed), graph, fixed);
}

std::string export_dot(const Graph& graph, const Arrangement& arr) {
  std::vector<std::size_t> step(graph.size(), 0);
  for (std::size_t t = 0; t < arr.steps.size(); ++t)
    for (NodeId id : arr.steps[t].ops) step[id] = t + 1;

  std::ostringstream out;
  out << "digraph model {\n";
  for (const auto& n : graph.nodes()) {
    if (n.kind == NodeKind::Constant) continue;
    out << "  n" << n.id << " [label=\"" << dot_escape(n.label);
    if (step[n.id]) out << "\\nstep " << step[n.id];
    out << "\"";
    if (n.kind == NodeKind::Logical)
      out << ", shape=box";
    else if (n.observed)
      out << ", style=filled, fillcolor=lightblue";
    else if (!arr.fixed.empty() && arr.fixed[n.id])
      out << ", style=dashed";
    out << "];\n";
  }
  for (const auto& n : graph.nodes()) {
    if (n.kind == NodeKind::Constant) continue;
    for (NodeId p : n.parents)
      if (graph.node(p).kind != NodeKind::Constant) out << "  n" << p << " -> n" << n.id << ";\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace bugsmc
