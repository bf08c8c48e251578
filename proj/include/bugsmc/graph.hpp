#pragma once

#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bugsmc/common.hpp"
#include "bugsmc/data_table.hpp"
#include "bugsmc/registry.hpp"

namespace bugsmc {

inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

/// Where each node's value lives: either in a bank shared by all particles
/// (constants, observations, conditioned parameters) or in the per-particle bank.
struct Layout {
  std::vector<std::size_t> offset;
  std::vector<bool> per_particle;
  std::size_t shared_size = 0;
  std::size_t particle_size = 0;
};

/// Read access to node values for one particle.
class ValueView {
 public:
  ValueView(const Layout& layout, const double* shared, const double* particle)
      : layout_(&layout), shared_(shared), particle_(particle) {}

  double at(NodeId node, std::size_t k) const {
    return (layout_->per_particle[node] ? particle_ : shared_)[layout_->offset[node] + k];
  }
  const double* data(NodeId node) const {
    return (layout_->per_particle[node] ? particle_ : shared_) + layout_->offset[node];
  }

 private:
  const Layout* layout_;
  const double* shared_;
  const double* particle_;
};

/// Scratch space for Program evaluation; one per thread.
struct Workspace {
  std::vector<double> stack;
  std::vector<double> params;
  std::vector<std::span<const double>> param_spans;
  std::vector<std::pair<std::size_t, std::size_t>> frames;
  std::vector<std::span<const double>> args;
};

/// A compiled expression: a small stack program over node values and
/// constants with dims fixed at compile time.
class Program {
 public:
  struct Slot {
    NodeId node = kNoNode;  // kNoNode: the slot holds `value`
    std::size_t offset = 0;
    double value = 0.0;
  };

  static Program constant(std::vector<double> values, Dims dims);

  const Dims& dims() const { return dims_; }
  std::size_t size() const { return element_count(dims_); }
  bool is_constant() const { return code_.size() == 1 && code_[0].op == Op::Const; }
  std::span<const double> constant_value() const { return consts_; }
  /// Name of the outermost function, "" for plain references and constants.
  const std::string& head() const { return head_; }
  /// Distinct nodes read by the program, ascending.
  const std::vector<NodeId>& parents() const { return parents_; }

  void eval(const ValueView& view, std::span<double> out, Workspace& ws) const;
  std::vector<double> eval(const ValueView& view) const;

 private:
  enum class Op { Const, Gather, Call };
  struct Instr {
    Op op;
    std::size_t begin = 0;
    std::size_t count = 0;  // values produced
    const Function* fn = nullptr;
    std::size_t nargs = 0;
  };

  friend class ProgramBuilder;

  std::vector<Instr> code_;
  std::vector<double> consts_;
  std::vector<Slot> slots_;
  std::vector<std::shared_ptr<const Function>> keep_alive_;
  std::vector<NodeId> parents_;
  std::size_t max_stack_ = 0;
  Dims dims_{1};
  std::string head_;
};

enum class NodeKind { Constant, Logical, Stochastic };

struct Node {
  NodeId id = 0;
  NodeKind kind = NodeKind::Constant;
  Dims dims{1};
  bool observed = false;
  std::string array;   // origin array name
  std::string label;   // e.g. x[3], pi[1,2], x[1:2,4]
  SourcePos pos;

  std::vector<double> value;  // Constant value or observed data

  Program expr;  // Logical

  std::shared_ptr<const Distribution> distribution;  // Stochastic
  std::vector<Program> params;
  std::optional<Program> lower;
  std::optional<Program> upper;

  std::vector<NodeId> parents;  // ascending, distinct

  std::size_t size() const { return element_count(dims); }
  bool truncated() const { return lower.has_value() || upper.has_value(); }
  bool is_stochastic() const { return kind == NodeKind::Stochastic; }
  bool is_latent() const { return kind == NodeKind::Stochastic && !observed; }
  const std::string& function_name() const { return expr.head(); }
};

/// One scalar element of a model array that is backed by a node.
struct ElementRef {
  std::string label;
  NodeId node = kNoNode;
  std::size_t offset = 0;
};

struct ArrayInfo {
  Dims dims{1};
  bool bare = false;  // declared without subscripts, e.g. `phi`
  /// Row-major; kNoNode marks elements that come only from data (or nowhere).
  std::vector<NodeId> node;
  std::vector<std::size_t> offset;
  bool in_data = false;

  /// `x[3]`, `pi[1,2]`, or the bare name for unsubscripted scalars.
  std::string element_label(const std::string& name, std::size_t k) const;
};

class Graph {
 public:
  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<NodeId>& children(NodeId id) const { return children_.at(id); }
  const std::map<std::string, ArrayInfo>& arrays() const { return arrays_; }
  const DataTable& data() const { return data_; }

  /// Kahn topological order, ties broken by ascending id.
  std::vector<NodeId> topological_order() const;

  /// Resolves `x`, `x[3]` or `pi[1,2]` to node-backed scalar elements.
  /// Throws ConfigError if nothing matches.
  std::vector<ElementRef> resolve(const std::string& name) const;

  /// Node ids covering a name (a whole array or one element).
  std::vector<NodeId> resolve_nodes(const std::string& name) const;

  std::size_t count(NodeKind kind) const;
  std::size_t count_observed() const;
  std::size_t count_in_array(const std::string& array, NodeKind kind) const;

  /// Layout with every node in the shared bank.
  Layout shared_layout() const;
  /// Layout for particle methods: logical and latent stochastic nodes not in
  /// `fixed` are per-particle; the rest are shared.
  Layout particle_layout(const std::vector<bool>& fixed) const;
  /// Shared bank initialized with constant and observed values.
  std::vector<double> initial_shared(const Layout& layout) const;

 private:
  friend class GraphBuilder;

  std::vector<Node> nodes_;
  std::vector<std::vector<NodeId>> children_;
  std::map<std::string, ArrayInfo> arrays_;
  DataTable data_;
};

/// Draws a stochastic node from its prior given the parent values in `view`.
void sample_node(const Node& node, const ValueView& view, Rng& rng, std::span<double> out,
                 Workspace& ws);

/// log pi(x | parents), including truncation renormalization.
double log_density_node(const Node& node, std::span<const double> x, const ValueView& view,
                        Workspace& ws);

/// Truncation bounds of a node under the parent values, if it is truncated.
std::optional<Bounds> node_bounds(const Node& node, const ValueView& view, Workspace& ws);

}  // namespace bugsmc
