#include "bugsmc/compiler.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "bugsmc/frontend.hpp"

namespace bugsmc {

/// Expression tree with constants folded, lowered into a Program.
class ProgramBuilder {
 public:
  struct Term {
    enum class Kind { Const, Gather, Call } kind = Kind::Const;
    std::vector<double> values;
    std::vector<Program::Slot> slots;
    std::shared_ptr<const Function> fn;
    std::vector<Term> args;
    Dims dims{1};
  };

  static Program build(const Term& t) {
    Program p;
    std::size_t depth = 0;
    emit(t, p, depth);
    p.dims_ = t.dims;
    if (t.kind == Term::Kind::Call) p.head_ = t.fn->name;
    std::sort(p.parents_.begin(), p.parents_.end());
    p.parents_.erase(std::unique(p.parents_.begin(), p.parents_.end()), p.parents_.end());
    return p;
  }

 private:
  static void emit(const Term& t, Program& p, std::size_t& depth) {
    using Op = Program::Op;
    switch (t.kind) {
      case Term::Kind::Const:
        p.code_.push_back({Op::Const, p.consts_.size(), t.values.size(), nullptr, 0});
        p.consts_.insert(p.consts_.end(), t.values.begin(), t.values.end());
        depth += t.values.size();
        break;
      case Term::Kind::Gather:
        p.code_.push_back({Op::Gather, p.slots_.size(), t.slots.size(), nullptr, 0});
        for (const auto& s : t.slots) {
          p.slots_.push_back(s);
          if (s.node != kNoNode) p.parents_.push_back(s.node);
        }
        depth += t.slots.size();
        break;
      case Term::Kind::Call: {
        const std::size_t before = depth;
        for (const auto& a : t.args) emit(a, p, depth);
        const std::size_t n = element_count(t.dims);
        p.max_stack_ = std::max(p.max_stack_, depth + n);
        p.code_.push_back({Op::Call, 0, n, t.fn.get(), t.args.size()});
        p.keep_alive_.push_back(t.fn);
        depth = before + n;
        break;
      }
    }
    p.max_stack_ = std::max(p.max_stack_, depth);
  }
};

using Term = ProgramBuilder::Term;

namespace {

constexpr double kIntegerTolerance = 1e-8;

using Env = std::map<std::string, long>;

std::string at(const SourcePos& pos) { return " at " + to_string(pos); }

/// A resolved subscript on the left of a relation.
struct Sub {
  long lo = 1;
  long hi = 0;
  bool scalar = false;
  bool empty = false;  // `x[,1]`; hi filled in once the extent is known
};

struct Instance {
  const Relation* rel = nullptr;
  Env env;
  std::vector<Sub> lhs;
  NodeId node = kNoNode;
  std::vector<std::size_t> offsets;  // array elements covered, row-major
  Dims shape{1};
};

struct VarShape {
  bool from_data = false;
  bool bare = false;
  std::size_t ndim = 0;
  Dims ext;
  std::set<std::size_t> pending;  // dims waiting for an empty-slice extent
};

}  // namespace

class GraphBuilder {
 public:
  GraphBuilder(const ModelAST& ast, const DataTable& data, const Registry& reg)
      : ast_(ast), data_(data), reg_(reg) {}

  Graph run() {
    const auto report = validate_ast(ast_, reg_);
    if (!report.ok()) throw CompileError(report.to_string());
    collect_lhs_names(ast_.statements);
    Env env;
    unroll(ast_.statements, env);
    infer_extents();
    make_arrays();
    for (auto& inst : instances_) create_node(inst);
    for (auto& inst : instances_) compile_node(inst);
    link();
    fold_constants();
    graph_.data_ = data_;
    return std::move(graph_);
  }

 private:
  // ---- loops and constant subscripts ------------------------------------

  void collect_lhs_names(const std::vector<Statement>& stmts) {
    for (const auto& st : stmts) {
      if (const auto* r = std::get_if<Relation>(&st.node))
        lhs_names_.insert(r->lhs.name);
      else
        collect_lhs_names(std::get<ForLoop>(st.node).body);
    }
  }

  double eval_scalar(const Expr& e, const Env& env) const {
    switch (e.kind) {
      case Expr::Kind::Constant:
        return e.value;
      case Expr::Kind::VarRef: {
        if (e.indices.empty()) {
          if (auto it = env.find(e.name); it != env.end()) return static_cast<double>(it->second);
        }
        const DataArray* d = data_.find(e.name);
        if (!d) {
          if (lhs_names_.count(e.name))
            throw CompileError("'" + e.name +
                               "' is a model variable; loop bounds and subscripts must be "
                               "constants" + at(e.pos));
          throw CompileError("unresolved name '" + e.name + "'" + at(e.pos));
        }
        std::size_t off = 0;
        if (e.indices.empty()) {
          if (d->size() != 1)
            throw CompileError("'" + e.name + "' is not a scalar" + at(e.pos));
        } else {
          std::vector<long> idx;
          for (const auto& ix : e.indices) {
            if (ix.kind != Index::Kind::Scalar)
              throw CompileError("range subscript in a constant expression" + at(e.pos));
            idx.push_back(eval_int(ix.bounds[0], env, "subscript"));
          }
          try {
            off = d->offset(idx);
          } catch (const Error& err) {
            throw CompileError("'" + e.name + "': " + err.what() + at(e.pos));
          }
        }
        if (d->missing[off])
          throw CompileError("'" + e.name + "' is missing in data but used as a constant" +
                             at(e.pos));
        return d->values[off];
      }
      case Expr::Kind::Unary:
      case Expr::Kind::Binary:
      case Expr::Kind::Apply: {
        const std::string fname =
            e.kind == Expr::Kind::Unary ? std::string(op::kNegate) : e.name;
        const Function* fn = reg_.find_function(fname);
        if (!fn) throw CompileError("unknown function '" + fname + "'" + at(e.pos));
        std::vector<double> vals;
        for (const auto& a : e.args) vals.push_back(eval_scalar(a, env));
        std::vector<std::span<const double>> spans;
        for (const auto& v : vals) spans.emplace_back(&v, 1);
        double out = 0.0;
        fn->eval(Args(spans), std::span<double>(&out, 1));
        return out;
      }
    }
    return 0.0;
  }

  long eval_int(const Expr& e, const Env& env, const std::string& what) const {
    const double v = eval_scalar(e, env);
    const double r = std::round(v);
    if (!std::isfinite(v) || std::abs(v - r) > kIntegerTolerance)
      throw CompileError(what + " does not evaluate to an integer (" + std::to_string(v) + ")" +
                         at(e.pos));
    return static_cast<long>(r);
  }

  void unroll(const std::vector<Statement>& stmts, Env& env) {
    for (const auto& st : stmts) {
      if (const auto* r = std::get_if<Relation>(&st.node)) {
        Instance inst;
        inst.rel = r;
        inst.env = env;
        for (const auto& ix : r->lhs.indices) {
          Sub s;
          if (ix.kind == Index::Kind::Scalar) {
            s.lo = s.hi = eval_int(ix.bounds[0], env, "subscript");
            s.scalar = true;
          } else if (ix.kind == Index::Kind::Range) {
            s.lo = eval_int(ix.bounds[0], env, "subscript");
            s.hi = eval_int(ix.bounds[1], env, "subscript");
            if (s.hi < s.lo) throw CompileError("empty subscript range" + at(r->lhs.pos));
          } else {
            s.empty = true;
          }
          if (!s.empty && s.lo < 1)
            throw CompileError("subscript " + std::to_string(s.lo) + " of '" + r->lhs.name +
                               "' is below 1" + at(r->lhs.pos));
          inst.lhs.push_back(s);
        }
        instances_.push_back(std::move(inst));
        continue;
      }
      const auto& loop = std::get<ForLoop>(st.node);
      if (data_.contains(loop.index) || lhs_names_.count(loop.index) || env.count(loop.index))
        throw CompileError("loop index '" + loop.index + "' shadows another name" + at(loop.pos));
      const long lo = eval_int(loop.lower, env, "loop bound");
      const long hi = eval_int(loop.upper, env, "loop bound");
      for (long v = lo; v <= hi; ++v) {
        env[loop.index] = v;
        unroll(loop.body, env);
      }
      env.erase(loop.index);
    }
  }

  // ---- extents -------------------------------------------------------------

  void infer_extents() {
    for (const auto& [name, d] : data_.entries()) {
      VarShape s;
      s.from_data = true;
      s.ndim = d.dims.size();
      s.ext = d.dims;
      shapes_[name] = s;
    }
    std::set<std::string> seen;
    for (auto& inst : instances_) {
      const auto& lhs = inst.rel->lhs;
      VarShape& s = shapes_[lhs.name];
      const std::size_t nd = inst.lhs.size();
      if (s.from_data) {
        if (nd == 0) {
          s.bare = true;
          continue;
        }
        if (nd != s.ndim)
          throw CompileError("'" + lhs.name + "' has " + std::to_string(s.ndim) +
                             " dimensions in data but " + std::to_string(nd) + " subscripts" +
                             at(lhs.pos));
        for (std::size_t d = 0; d < nd; ++d) {
          Sub& sub = inst.lhs[d];
          if (sub.empty) {
            sub.hi = static_cast<long>(s.ext[d]);
          } else if (static_cast<std::size_t>(sub.hi) > s.ext[d]) {
            throw CompileError("subscript " + std::to_string(sub.hi) + " of '" + lhs.name +
                               "' exceeds its data extent " + std::to_string(s.ext[d]) +
                               at(lhs.pos));
          }
        }
        continue;
      }
      if (seen.insert(lhs.name).second) {
        s.ndim = nd;
        s.bare = nd == 0;
        s.ext.assign(nd, 0);
      } else if (s.ndim != nd) {
        throw CompileError("'" + lhs.name + "' is used with different numbers of subscripts" +
                           at(lhs.pos));
      }
      for (std::size_t d = 0; d < nd; ++d) {
        if (inst.lhs[d].empty)
          s.pending.insert(d);
        else
          s.ext[d] = std::max(s.ext[d], static_cast<std::size_t>(inst.lhs[d].hi));
      }
    }

    // Empty slices on the left take their extent from the right-hand side.
    std::vector<Instance*> pending;
    for (auto& inst : instances_)
      if (!shapes_[inst.rel->lhs.name].from_data &&
          std::any_of(inst.lhs.begin(), inst.lhs.end(), [](const Sub& s) { return s.empty; }))
        pending.push_back(&inst);
    bool progress = true;
    while (!pending.empty() && progress) {
      progress = false;
      for (auto it = pending.begin(); it != pending.end();) {
        const auto dims = rhs_dims(**it);
        if (!dims) {
          ++it;
          continue;
        }
        solve_empty(**it, *dims);
        it = pending.erase(it);
        progress = true;
      }
    }
    if (!pending.empty()) {
      const auto& lhs = pending.front()->rel->lhs;
      throw CompileError("cannot determine the extent of the empty subscript of '" + lhs.name +
                         "'" + at(lhs.pos));
    }
    for (auto& inst : instances_) {
      const VarShape& s = shapes_[inst.rel->lhs.name];
      for (std::size_t d = 0; d < inst.lhs.size(); ++d)
        if (inst.lhs[d].empty) inst.lhs[d].hi = static_cast<long>(s.ext[d]);
    }
  }

  void solve_empty(Instance& inst, const Dims& rhs) {
    const auto& lhs = inst.rel->lhs;
    VarShape& s = shapes_[lhs.name];
    std::size_t known = 1;
    std::optional<std::size_t> unknown;
    for (std::size_t d = 0; d < inst.lhs.size(); ++d) {
      const Sub& sub = inst.lhs[d];
      if (sub.empty) {
        if (unknown)
          throw CompileError("at most one empty subscript is supported on the left of a relation" +
                             at(lhs.pos));
        unknown = d;
      } else {
        known *= static_cast<std::size_t>(sub.hi - sub.lo + 1);
      }
    }
    const std::size_t total = element_count(rhs);
    if (total % known != 0)
      throw CompileError("dimension mismatch for '" + lhs.name + "': right side has dims " +
                         to_string(rhs) + at(lhs.pos));
    const std::size_t extent = total / known;
    s.ext[*unknown] = std::max(s.ext[*unknown], extent);
    s.pending.erase(*unknown);
  }

  /// Dims of an expression, or nullopt while some empty-slice extent is unknown.
  std::optional<Dims> expr_dims(const Expr& e, const Env& env) const {
    switch (e.kind) {
      case Expr::Kind::Constant:
        return Dims{1};
      case Expr::Kind::VarRef: {
        if (e.indices.empty() && env.count(e.name)) return Dims{1};
        const auto it = shapes_.find(e.name);
        if (it == shapes_.end())
          throw CompileError("unresolved name '" + e.name + "'" + at(e.pos));
        const VarShape& s = it->second;
        if (e.indices.empty()) {
          if (!s.pending.empty()) return std::nullopt;
          return s.ndim == 0 ? Dims{1} : squeeze(s.ext);
        }
        if (e.indices.size() != s.ndim)
          throw CompileError("'" + e.name + "' has " + std::to_string(s.ndim) +
                             " dimensions but is used with " + std::to_string(e.indices.size()) +
                             " subscripts" + at(e.pos));
        Dims shape;
        for (std::size_t d = 0; d < e.indices.size(); ++d) {
          const auto& ix = e.indices[d];
          if (ix.kind == Index::Kind::Scalar) continue;
          if (ix.kind == Index::Kind::Range) {
            const long lo = eval_int(ix.bounds[0], env, "subscript");
            const long hi = eval_int(ix.bounds[1], env, "subscript");
            shape.push_back(static_cast<std::size_t>(std::max(0L, hi - lo + 1)));
          } else {
            if (s.pending.count(d)) return std::nullopt;
            shape.push_back(s.ext[d]);
          }
        }
        return shape.empty() ? Dims{1} : squeeze(shape);
      }
      default: {
        std::vector<Dims> args;
        for (const auto& a : e.args) {
          auto d = expr_dims(a, env);
          if (!d) return std::nullopt;
          args.push_back(std::move(*d));
        }
        const std::string fname = e.kind == Expr::Kind::Unary ? std::string(op::kNegate) : e.name;
        const Function* fn = reg_.find_function(fname);
        try {
          return fn->dim(args);
        } catch (const CompileError& err) {
          throw CompileError(std::string("'") + fname + "': " + err.what() + at(e.pos));
        }
      }
    }
  }

  std::optional<Dims> rhs_dims(const Instance& inst) const {
    const Relation& r = *inst.rel;
    if (r.kind == Relation::Kind::Deterministic) return expr_dims(r.rhs, inst.env);
    std::vector<Dims> args;
    for (const auto& p : r.params) {
      auto d = expr_dims(p, inst.env);
      if (!d) return std::nullopt;
      args.push_back(std::move(*d));
    }
    const Distribution* dist = reg_.find_distribution(r.distribution);
    try {
      return squeeze(dist->dim(args));
    } catch (const CompileError& err) {
      throw CompileError("'" + r.distribution + "': " + err.what() + at(r.pos));
    }
  }

  void make_arrays() {
    for (const auto& [name, s] : shapes_) {
      ArrayInfo a;
      a.dims = s.ndim == 0 ? Dims{1} : s.ext;
      for (auto d : a.dims)
        if (d == 0) throw CompileError("'" + name + "' has an empty extent");
      a.bare = s.bare;
      a.in_data = s.from_data;
      a.node.assign(element_count(a.dims), kNoNode);
      a.offset.assign(element_count(a.dims), 0);
      graph_.arrays_[name] = std::move(a);
    }
  }

  // ---- nodes ---------------------------------------------------------------

  void create_node(Instance& inst) {
    const Relation& r = *inst.rel;
    const std::string& name = r.lhs.name;
    ArrayInfo& a = graph_.arrays_.at(name);

    std::string label = name;
    Dims shape;
    if (inst.lhs.empty()) {
      for (std::size_t k = 0; k < a.node.size(); ++k) inst.offsets.push_back(k);
      shape = a.dims;
    } else {
      label += "[";
      for (std::size_t d = 0; d < inst.lhs.size(); ++d) {
        const Sub& s = inst.lhs[d];
        if (d) label += ",";
        label += std::to_string(s.lo);
        if (!s.scalar) {
          label += ":" + std::to_string(s.hi);
          shape.push_back(static_cast<std::size_t>(s.hi - s.lo + 1));
        }
        if (static_cast<std::size_t>(s.hi) > a.dims[d])
          throw CompileError("subscript out of range in '" + label + "'" + at(r.lhs.pos));
      }
      label += "]";
      // Row-major enumeration of the covered elements.
      std::vector<long> idx;
      for (const auto& s : inst.lhs) idx.push_back(s.lo);
      while (true) {
        std::size_t off = 0;
        for (std::size_t d = 0; d < idx.size(); ++d)
          off = off * a.dims[d] + static_cast<std::size_t>(idx[d] - 1);
        inst.offsets.push_back(off);
        bool done = true;
        for (std::size_t d = idx.size(); d-- > 0;) {
          if (idx[d] < inst.lhs[d].hi) {
            ++idx[d];
            done = false;
            break;
          }
          idx[d] = inst.lhs[d].lo;
        }
        if (done) break;
      }
    }
    inst.shape = shape.empty() ? Dims{1} : squeeze(shape);

    Node n;
    n.id = graph_.nodes_.size();
    n.array = name;
    n.label = inst.lhs.empty() && inst.offsets.size() == 1 ? name : label;
    n.pos = r.pos;
    n.dims = inst.shape;
    n.kind = r.kind == Relation::Kind::Stochastic ? NodeKind::Stochastic : NodeKind::Logical;
    for (std::size_t i = 0; i < inst.offsets.size(); ++i) {
      const std::size_t k = inst.offsets[i];
      if (a.node[k] != kNoNode)
        throw CompileError("element defined twice: " + a.element_label(name, k) + at(r.pos));
      a.node[k] = n.id;
      a.offset[k] = i;
    }
    if (const DataArray* d = data_.find(name)) {
      std::size_t present = 0;
      for (auto k : inst.offsets) present += d->missing[k] ? 0 : 1;
      if (present > 0 && n.kind == NodeKind::Logical)
        throw CompileError("logical node '" + n.label + "' cannot be given in data" + at(r.pos));
      if (present > 0 && present < inst.offsets.size())
        throw CompileError("node '" + n.label + "' is only partially observed" + at(r.pos));
      if (present == inst.offsets.size() && present > 0) {
        n.observed = true;
        for (auto k : inst.offsets) n.value.push_back(d->values[k]);
      }
    }
    inst.node = n.id;
    graph_.nodes_.push_back(std::move(n));
  }

  Term compile_term(const Expr& e, const Env& env) const {
    Term t;
    switch (e.kind) {
      case Expr::Kind::Constant:
        t.values = {e.value};
        return t;
      case Expr::Kind::VarRef:
        return compile_ref(e, env);
      default:
        break;
    }
    const std::string fname = e.kind == Expr::Kind::Unary ? std::string(op::kNegate) : e.name;
    t.kind = Term::Kind::Call;
    t.fn = reg_.function_ptr(fname);
    if (!t.fn) throw CompileError("unknown function '" + fname + "'" + at(e.pos));
    std::vector<Dims> dims;
    bool all_const = true;
    for (const auto& a : e.args) {
      t.args.push_back(compile_term(a, env));
      dims.push_back(t.args.back().dims);
      all_const = all_const && t.args.back().kind == Term::Kind::Const;
    }
    try {
      t.dims = squeeze(t.fn->dim(dims));
    } catch (const CompileError& err) {
      throw CompileError("'" + fname + "': " + err.what() + at(e.pos));
    }
    if (all_const) {
      std::vector<std::span<const double>> spans;
      for (const auto& a : t.args) spans.emplace_back(a.values);
      Term c;
      c.values.assign(element_count(t.dims), 0.0);
      t.fn->eval(Args(spans), c.values);
      c.dims = t.dims;
      return c;
    }
    return t;
  }

  Term compile_ref(const Expr& e, const Env& env) const {
    Term t;
    if (e.indices.empty()) {
      if (auto it = env.find(e.name); it != env.end()) {
        t.values = {static_cast<double>(it->second)};
        return t;
      }
    }
    const auto ait = graph_.arrays_.find(e.name);
    if (ait == graph_.arrays_.end())
      throw CompileError("unresolved name '" + e.name + "'" + at(e.pos));
    const ArrayInfo& a = ait->second;
    const DataArray* data = data_.find(e.name);

    std::vector<std::vector<std::size_t>> per_dim;  // 0-based positions per dim
    Dims shape;
    if (e.indices.empty()) {
      for (auto d : a.dims) {
        std::vector<std::size_t> all(d);
        for (std::size_t i = 0; i < d; ++i) all[i] = i;
        per_dim.push_back(std::move(all));
      }
      shape = a.dims;
    } else {
      if (e.indices.size() != a.dims.size())
        throw CompileError("'" + e.name + "' has " + std::to_string(a.dims.size()) +
                           " dimensions but is used with " + std::to_string(e.indices.size()) +
                           " subscripts" + at(e.pos));
      for (std::size_t d = 0; d < e.indices.size(); ++d) {
        const auto& ix = e.indices[d];
        long lo = 1, hi = static_cast<long>(a.dims[d]);
        if (ix.kind == Index::Kind::Scalar) {
          lo = hi = eval_int(ix.bounds[0], env, "subscript");
        } else if (ix.kind == Index::Kind::Range) {
          lo = eval_int(ix.bounds[0], env, "subscript");
          hi = eval_int(ix.bounds[1], env, "subscript");
        }
        if (lo < 1 || hi < lo || static_cast<std::size_t>(hi) > a.dims[d])
          throw CompileError("subscript out of range for '" + e.name + "' (dims " +
                             to_string(a.dims) + ")" + at(e.pos));
        std::vector<std::size_t> pos;
        for (long i = lo; i <= hi; ++i) pos.push_back(static_cast<std::size_t>(i - 1));
        if (ix.kind != Index::Kind::Scalar) shape.push_back(pos.size());
        per_dim.push_back(std::move(pos));
      }
    }
    t.dims = shape.empty() ? Dims{1} : squeeze(shape);

    bool all_const = true;
    std::vector<std::size_t> cursor(per_dim.size(), 0);
    while (true) {
      std::size_t k = 0;
      for (std::size_t d = 0; d < per_dim.size(); ++d) k = k * a.dims[d] + per_dim[d][cursor[d]];
      Program::Slot slot;
      if (a.node[k] != kNoNode) {
        slot.node = a.node[k];
        slot.offset = a.offset[k];
        all_const = false;
      } else if (data && !data->missing[k]) {
        slot.value = data->values[k];
      } else {
        throw CompileError("'" + a.element_label(e.name, k) +
                           "' is used but is neither defined nor given in data" + at(e.pos));
      }
      t.slots.push_back(slot);
      std::size_t d = per_dim.size();
      bool done = true;
      while (d > 0) {
        --d;
        if (++cursor[d] < per_dim[d].size()) {
          done = false;
          break;
        }
        cursor[d] = 0;
      }
      if (done) break;
    }
    if (all_const) {
      for (const auto& s : t.slots) t.values.push_back(s.value);
      t.slots.clear();
      t.kind = Term::Kind::Const;
    } else {
      t.kind = Term::Kind::Gather;
    }
    return t;
  }

  void check_dims(const Instance& inst, const Dims& rhs) const {
    const Node& n = graph_.nodes_[inst.node];
    if (element_count(rhs) != inst.offsets.size() || squeeze(rhs) != inst.shape)
      throw CompileError("dimension mismatch in '" + n.label + "': left side has dims " +
                         to_string(inst.shape) + ", right side " + to_string(rhs) +
                         at(inst.rel->pos));
  }

  Program scalar_bound(const Expr& e, const Env& env) const {
    Term t = compile_term(e, env);
    if (!is_scalar(t.dims))
      throw CompileError("truncation bound must be scalar" + at(e.pos));
    return ProgramBuilder::build(t);
  }

  void compile_node(const Instance& inst) {
    const Relation& r = *inst.rel;
    Node& n = graph_.nodes_[inst.node];
    std::vector<NodeId> parents;
    if (r.kind == Relation::Kind::Deterministic) {
      Term t = compile_term(r.rhs, inst.env);
      check_dims(inst, t.dims);
      if (t.kind == Term::Kind::Const) {
        n.kind = NodeKind::Constant;
        n.value = t.values;
      } else {
        n.expr = ProgramBuilder::build(t);
        parents = n.expr.parents();
      }
    } else {
      n.distribution = reg_.distribution_ptr(r.distribution);
      std::vector<Dims> dims;
      for (const auto& p : r.params) {
        Term t = compile_term(p, inst.env);
        dims.push_back(t.dims);
        n.params.push_back(ProgramBuilder::build(t));
      }
      Dims out;
      try {
        out = squeeze(n.distribution->dim(dims));
      } catch (const CompileError& err) {
        throw CompileError("'" + r.distribution + "': " + err.what() + at(r.pos));
      }
      check_dims(inst, out);
      if (r.truncation) {
        if (!n.distribution->can_truncate() || !is_scalar(out))
          throw CompileError("distribution '" + r.distribution + "' cannot be truncated" +
                             at(r.pos));
        if (r.truncation->lower) n.lower = scalar_bound(*r.truncation->lower, inst.env);
        if (r.truncation->upper) n.upper = scalar_bound(*r.truncation->upper, inst.env);
        if (n.lower && n.upper && n.lower->is_constant() && n.upper->is_constant() &&
            !(n.lower->constant_value()[0] < n.upper->constant_value()[0]))
          throw CompileError("truncation bounds of '" + n.label +
                             "' must satisfy lower < upper" + at(r.pos));
      }
      if (n.observed && !n.distribution->has_density())
        throw CompileError("distribution '" + r.distribution +
                           "' has no density, so '" + n.label + "' must be unobserved" +
                           at(r.pos));
      auto add = [&](const Program& p) {
        parents.insert(parents.end(), p.parents().begin(), p.parents().end());
      };
      for (const auto& p : n.params) add(p);
      if (n.lower) add(*n.lower);
      if (n.upper) add(*n.upper);
    }
    std::sort(parents.begin(), parents.end());
    parents.erase(std::unique(parents.begin(), parents.end()), parents.end());
    n.parents = std::move(parents);
  }

  void link() {
    auto& nodes = graph_.nodes_;
    graph_.children_.assign(nodes.size(), {});
    for (const auto& n : nodes)
      for (NodeId p : n.parents) graph_.children_[p].push_back(n.id);
    const auto order = graph_.topological_order();
    if (order.size() != nodes.size()) {
      std::vector<bool> placed(nodes.size(), false);
      for (NodeId v : order) placed[v] = true;
      for (const auto& n : nodes)
        if (!placed[n.id])
          throw CompileError("cyclic definition involving '" + n.label + "'" + at(n.pos));
    }
  }

  /// Logical nodes whose parents are all constant become constants.
  void fold_constants() {
    const Layout layout = graph_.shared_layout();
    std::vector<double> bank = graph_.initial_shared(layout);
    Workspace ws;
    for (NodeId id : graph_.topological_order()) {
      Node& n = graph_.nodes_[id];
      if (n.kind != NodeKind::Logical) continue;
      const bool all_const = std::all_of(n.parents.begin(), n.parents.end(), [&](NodeId p) {
        return graph_.nodes_[p].kind == NodeKind::Constant;
      });
      if (!all_const) continue;
      n.value.assign(n.size(), 0.0);
      n.expr.eval(ValueView(layout, bank.data(), nullptr), n.value, ws);
      std::copy(n.value.begin(), n.value.end(), bank.begin() + layout.offset[id]);
      n.kind = NodeKind::Constant;
    }
  }

  const ModelAST& ast_;
  const DataTable& data_;
  const Registry& reg_;
  std::set<std::string> lhs_names_;
  std::vector<Instance> instances_;
  std::map<std::string, VarShape> shapes_;
  Graph graph_;
};

Graph compile(const ModelAST& ast, const DataTable& data, const Registry& registry) {
  return GraphBuilder(ast, data, registry).run();
}

Graph compile(std::string_view source, const DataTable& data, const Registry& registry) {
  return compile(parse_model(source), data, registry);
}

DataTable forward_sample_data(const Graph& graph, const std::vector<std::string>& targets,
                              std::uint64_t seed) {
  std::vector<bool> needed(graph.size(), false);
  std::vector<NodeId> stack;
  for (const auto& name : targets)
    for (NodeId id : graph.resolve_nodes(name)) stack.push_back(id);
  while (!stack.empty()) {
    const NodeId v = stack.back();
    stack.pop_back();
    if (needed[v]) continue;
    needed[v] = true;
    for (NodeId p : graph.node(v).parents) stack.push_back(p);
  }

  const Layout layout = graph.shared_layout();
  std::vector<double> bank = graph.initial_shared(layout);
  Rng rng(seed);
  Workspace ws;
  for (NodeId id : graph.topological_order()) {
    if (!needed[id]) continue;
    const Node& n = graph.node(id);
    std::span<double> out(bank.data() + layout.offset[id], n.size());
    const ValueView view(layout, bank.data(), nullptr);
    if (n.kind == NodeKind::Logical) {
      n.expr.eval(view, out, ws);
    } else if (n.is_latent()) {
      sample_node(n, view, rng, out, ws);
    }
  }

  DataTable result = graph.data();
  for (const auto& name : targets) {
    const auto [array, index] = parse_element_label(name);
    const ArrayInfo& a = graph.arrays().at(array);
    DataArray* d = result.find(array);
    if (!d) {
      result.set(array, DataArray::empty(a.dims));
      d = result.find(array);
    }
    for (const auto& e : graph.resolve(name)) {
      const NodeId id = e.node;
      for (std::size_t k = 0; k < a.node.size(); ++k) {
        if (a.node[k] != id || a.offset[k] != e.offset) continue;
        if (!d->missing[k]) break;
        d->values[k] = bank[layout.offset[id] + e.offset];
        d->missing[k] = false;
        break;
      }
    }
  }
  return result;
}

LogicalValue evaluate_logical(const Graph& graph, NodeId id,
                              const std::map<NodeId, std::vector<double>>& parent_values) {
  const Node& n = graph.node(id);
  LogicalValue out;
  if (n.kind == NodeKind::Constant) {
    out.value = n.value;
  } else {
    if (n.kind != NodeKind::Logical)
      throw Error("'" + n.label + "' is not a logical node");
    const Layout layout = graph.shared_layout();
    std::vector<double> bank = graph.initial_shared(layout);
    for (NodeId p : n.parents) {
      const Node& pn = graph.node(p);
      const auto it = parent_values.find(p);
      if (it == parent_values.end()) {
        if (pn.kind == NodeKind::Constant || pn.observed) continue;
        throw Error("no value supplied for parent '" + pn.label + "'");
      }
      if (it->second.size() != pn.size())
        throw Error("value for '" + pn.label + "' has " + std::to_string(it->second.size()) +
                    " elements, expected " + std::to_string(pn.size()));
      std::copy(it->second.begin(), it->second.end(), bank.begin() + layout.offset[p]);
    }
    out.value = n.expr.eval(ValueView(layout, bank.data(), nullptr));
  }
  out.domain_error =
      std::any_of(out.value.begin(), out.value.end(), [](double v) { return std::isnan(v); });
  return out;
}

}  // namespace bugsmc
