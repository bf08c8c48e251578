#include "bugsmc/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace bugsmc {

Program Program::constant(std::vector<double> values, Dims dims) {
  Program p;
  p.code_.push_back({Op::Const, 0, values.size(), nullptr, 0});
  p.max_stack_ = values.size();
  p.consts_ = std::move(values);
  p.dims_ = std::move(dims);
  return p;
}

void Program::eval(const ValueView& view, std::span<double> out, Workspace& ws) const {
  if (ws.stack.size() < max_stack_) ws.stack.resize(max_stack_);
  auto& frames = ws.frames;
  frames.clear();
  double* stack = ws.stack.data();
  std::size_t top = 0;
  for (const auto& in : code_) {
    switch (in.op) {
      case Op::Const:
        std::copy_n(consts_.data() + in.begin, in.count, stack + top);
        frames.emplace_back(top, in.count);
        top += in.count;
        break;
      case Op::Gather:
        for (std::size_t i = 0; i < in.count; ++i) {
          const Slot& s = slots_[in.begin + i];
          stack[top + i] = s.node == kNoNode ? s.value : view.at(s.node, s.offset);
        }
        frames.emplace_back(top, in.count);
        top += in.count;
        break;
      case Op::Call: {
        const std::size_t first = frames.size() - in.nargs;
        ws.args.clear();
        for (std::size_t j = 0; j < in.nargs; ++j)
          ws.args.emplace_back(stack + frames[first + j].first, frames[first + j].second);
        in.fn->eval(Args(ws.args), std::span<double>(stack + top, in.count));
        const std::size_t dst = in.nargs ? frames[first].first : top;
        if (dst != top) std::copy_n(stack + top, in.count, stack + dst);
        frames.resize(first);
        frames.emplace_back(dst, in.count);
        top = dst + in.count;
        break;
      }
    }
  }
  std::copy_n(stack, out.size(), out.data());
}

std::vector<double> Program::eval(const ValueView& view) const {
  Workspace ws;
  std::vector<double> out(size());
  eval(view, out, ws);
  return out;
}

std::string ArrayInfo::element_label(const std::string& name, std::size_t k) const {
  if (bare && element_count(dims) == 1) return name;
  std::vector<std::size_t> idx(dims.size());
  for (std::size_t d = dims.size(); d-- > 0;) {
    idx[d] = k % dims[d] + 1;
    k /= dims[d];
  }
  std::string s = name + "[";
  for (std::size_t d = 0; d < idx.size(); ++d) {
    if (d) s += ",";
    s += std::to_string(idx[d]);
  }
  return s + "]";
}

std::vector<NodeId> Graph::topological_order() const {
  std::vector<std::size_t> indeg(nodes_.size());
  for (const auto& n : nodes_) indeg[n.id] = n.parents.size();
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (NodeId i = 0; i < nodes_.size(); ++i)
    if (indeg[i] == 0) ready.push(i);
  std::vector<NodeId> order;
  order.reserve(nodes_.size());
  while (!ready.empty()) {
    const NodeId v = ready.top();
    ready.pop();
    order.push_back(v);
    for (NodeId c : children_[v])
      if (--indeg[c] == 0) ready.push(c);
  }
  return order;
}

std::vector<ElementRef> Graph::resolve(const std::string& name) const {
  std::pair<std::string, std::vector<long>> parsed;
  try {
    parsed = parse_element_label(name);
  } catch (const Error&) {
    throw ConfigError("unknown variable '" + name + "'");
  }
  const auto it = arrays_.find(parsed.first);
  if (it == arrays_.end()) throw ConfigError("unknown variable '" + name + "'");
  const ArrayInfo& a = it->second;
  std::vector<ElementRef> out;
  auto push = [&](std::size_t k) {
    if (a.node[k] != kNoNode) out.push_back({a.element_label(it->first, k), a.node[k], a.offset[k]});
  };
  if (parsed.second.empty()) {
    for (std::size_t k = 0; k < a.node.size(); ++k) push(k);
  } else {
    if (parsed.second.size() != a.dims.size())
      throw ConfigError("'" + name + "' has the wrong number of subscripts");
    std::size_t k = 0;
    for (std::size_t d = 0; d < a.dims.size(); ++d) {
      const long i = parsed.second[d];
      if (i < 1 || static_cast<std::size_t>(i) > a.dims[d])
        throw ConfigError("'" + name + "' is out of range for dims " + to_string(a.dims));
      k = k * a.dims[d] + static_cast<std::size_t>(i - 1);
    }
    push(k);
  }
  if (out.empty()) throw ConfigError("'" + name + "' is not a node of the model");
  return out;
}

std::vector<NodeId> Graph::resolve_nodes(const std::string& name) const {
  std::vector<NodeId> ids;
  for (const auto& e : resolve(name))
    if (ids.empty() || ids.back() != e.node) ids.push_back(e.node);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::size_t Graph::count(NodeKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [&](const Node& n) { return n.kind == kind; }));
}

std::size_t Graph::count_observed() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.observed; }));
}

std::size_t Graph::count_in_array(const std::string& array, NodeKind kind) const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [&](const Node& n) {
    return n.kind == kind && n.array == array;
  }));
}

Layout Graph::shared_layout() const { return particle_layout(std::vector<bool>(nodes_.size(), true)); }

Layout Graph::particle_layout(const std::vector<bool>& fixed) const {
  Layout l;
  l.offset.resize(nodes_.size());
  l.per_particle.resize(nodes_.size());
  for (const auto& n : nodes_) {
    const bool pp = !fixed[n.id] && (n.kind == NodeKind::Logical || n.is_latent());
    l.per_particle[n.id] = pp;
    std::size_t& size = pp ? l.particle_size : l.shared_size;
    l.offset[n.id] = size;
    size += n.size();
  }
  return l;
}

std::vector<double> Graph::initial_shared(const Layout& layout) const {
  std::vector<double> bank(layout.shared_size, 0.0);
  for (const auto& n : nodes_) {
    if (layout.per_particle[n.id]) continue;
    if (n.kind == NodeKind::Constant || n.observed)
      std::copy(n.value.begin(), n.value.end(), bank.begin() + layout.offset[n.id]);
  }
  return bank;
}

namespace {

Args eval_params(const Node& node, const ValueView& view, Workspace& ws) {
  std::size_t total = 0;
  for (const auto& p : node.params) total += p.size();
  ws.params.resize(total);
  ws.param_spans.clear();
  std::size_t at = 0;
  for (const auto& p : node.params) {
    std::span<double> out(ws.params.data() + at, p.size());
    p.eval(view, out, ws);
    ws.param_spans.emplace_back(out.data(), out.size());
    at += p.size();
  }
  return Args(ws.param_spans);
}

}  // namespace

std::optional<Bounds> node_bounds(const Node& node, const ValueView& view, Workspace& ws) {
  if (!node.truncated()) return std::nullopt;
  Bounds b;
  double v = 0.0;
  if (node.lower) {
    node.lower->eval(view, std::span<double>(&v, 1), ws);
    b.lower = v;
  }
  if (node.upper) {
    node.upper->eval(view, std::span<double>(&v, 1), ws);
    b.upper = v;
  }
  return b;
}

void sample_node(const Node& node, const ValueView& view, Rng& rng, std::span<double> out,
                 Workspace& ws) {
  const auto bounds = node_bounds(node, view, ws);
  const Args params = eval_params(node, view, ws);
  sample(*node.distribution, params, bounds, rng, out);
}

double log_density_node(const Node& node, std::span<const double> x, const ValueView& view,
                        Workspace& ws) {
  const auto bounds = node_bounds(node, view, ws);
  const Args params = eval_params(node, view, ws);
  return log_density(*node.distribution, x, params, bounds);
}

}  // namespace bugsmc
