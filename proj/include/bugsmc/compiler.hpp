#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "bugsmc/ast.hpp"
#include "bugsmc/data_table.hpp"
#include "bugsmc/graph.hpp"
#include "bugsmc/registry.hpp"

namespace bugsmc {

/// Unrolls loops, instantiates every relation elementwise and links the
/// nodes into a DAG. Data entries become constants or observations.
Graph compile(const ModelAST& ast, const DataTable& data, const Registry& registry);

/// parse_model + compile.
Graph compile(std::string_view source, const DataTable& data, const Registry& registry);

/// Ancestral sampling of the named arrays (and everything they depend on).
/// Observed elements keep their data values.
DataTable forward_sample_data(const Graph& graph, const std::vector<std::string>& targets,
                              std::uint64_t seed);

struct LogicalValue {
  std::vector<double> value;
  bool domain_error = false;  // some element evaluated to NaN
};

/// Evaluates a logical node from explicit parent values. Constant parents
/// may be omitted.
LogicalValue evaluate_logical(const Graph& graph, NodeId node,
                              const std::map<NodeId, std::vector<double>>& parent_values);

}  // namespace bugsmc
