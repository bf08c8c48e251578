#pragma once

#include <string>
#include <vector>

#include "bugsmc/graph.hpp"

namespace bugsmc {

/// One SMC step: the latent group X'_t sampled, then the observed group Y'_t weighted.
struct Step {
  std::vector<NodeId> latent;
  std::vector<NodeId> observed;
  /// Latent, logical and observed nodes handled at this step, in sorted order.
  std::vector<NodeId> ops;
};

struct Arrangement {
  std::vector<Step> steps;
  /// Nodes held fixed (conditioned on) rather than handled by the particles.
  std::vector<bool> fixed;

  std::size_t n() const { return steps.size(); }
};

/// Kahn's algorithm where ready observed stochastic nodes go first, then
/// logical/constant/fixed nodes, then unobserved stochastic nodes; ties by id.
/// `fixed` (optional, indexed by node id) marks latent nodes treated as known.
std::vector<NodeId> topological_sort_prioritized(const Graph& graph,
                                                 const std::vector<bool>& fixed = {});

/// Splits a prioritized order into alternating latent/observed groups.
Arrangement group_nodes(const std::vector<NodeId>& sorted, const Graph& graph,
                        const std::vector<bool>& fixed = {});

/// topological_sort_prioritized + group_nodes.
Arrangement arrange(const Graph& graph, const std::vector<bool>& fixed = {});

/// Graphviz text; stochastic nodes carry their step in the label.
std::string export_dot(const Graph& graph, const Arrangement& arrangement);

}  // namespace bugsmc
