#include "bugsmc/ast.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace bugsmc {

Expr Expr::constant(double v, SourcePos pos) {
  Expr e;
  e.kind = Kind::Constant;
  e.value = v;
  e.pos = pos;
  return e;
}

Expr Expr::var(std::string name, std::vector<Index> indices, SourcePos pos) {
  Expr e;
  e.kind = Kind::VarRef;
  e.name = std::move(name);
  e.indices = std::move(indices);
  e.pos = pos;
  return e;
}

Expr Expr::apply(std::string fn, std::vector<Expr> args, SourcePos pos) {
  Expr e;
  e.kind = Kind::Apply;
  e.name = std::move(fn);
  e.args = std::move(args);
  e.pos = pos;
  return e;
}

Expr Expr::binary(std::string op, Expr lhs, Expr rhs, SourcePos pos) {
  Expr e;
  e.kind = Kind::Binary;
  e.name = std::move(op);
  e.args.push_back(std::move(lhs));
  e.args.push_back(std::move(rhs));
  e.pos = pos;
  return e;
}

Expr Expr::unary(std::string op, Expr operand, SourcePos pos) {
  Expr e;
  e.kind = Kind::Unary;
  e.name = std::move(op);
  e.args.push_back(std::move(operand));
  e.pos = pos;
  return e;
}

namespace {

bool equal_exprs(const std::vector<Expr>& a, const std::vector<Expr>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!structurally_equal(a[i], b[i])) return false;
  return true;
}

bool equal_opt(const std::optional<Expr>& a, const std::optional<Expr>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || structurally_equal(*a, *b);
}

bool equal_relations(const Relation& a, const Relation& b) {
  if (a.kind != b.kind || !structurally_equal(a.lhs, b.lhs)) return false;
  if (a.kind == Relation::Kind::Deterministic) return structurally_equal(a.rhs, b.rhs);
  if (a.distribution != b.distribution || !equal_exprs(a.params, b.params)) return false;
  if (a.truncation.has_value() != b.truncation.has_value()) return false;
  if (!a.truncation) return true;
  return equal_opt(a.truncation->lower, b.truncation->lower) &&
         equal_opt(a.truncation->upper, b.truncation->upper);
}

bool equal_statements(const std::vector<Statement>& a, const std::vector<Statement>& b);

bool equal_statement(const Statement& a, const Statement& b) {
  if (a.node.index() != b.node.index()) return false;
  if (const auto* ra = std::get_if<Relation>(&a.node))
    return equal_relations(*ra, std::get<Relation>(b.node));
  const auto& la = std::get<ForLoop>(a.node);
  const auto& lb = std::get<ForLoop>(b.node);
  return la.index == lb.index && structurally_equal(la.lower, lb.lower) &&
         structurally_equal(la.upper, lb.upper) && equal_statements(la.body, lb.body);
}

bool equal_statements(const std::vector<Statement>& a, const std::vector<Statement>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!equal_statement(a[i], b[i])) return false;
  return true;
}

void write_expr(std::ostream& os, const Expr& e);

void write_indices(std::ostream& os, const std::vector<Index>& indices) {
  if (indices.empty()) return;
  os << '[';
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (i) os << ',';
    const auto& idx = indices[i];
    if (idx.kind == Index::Kind::Scalar) {
      write_expr(os, idx.bounds[0]);
    } else if (idx.kind == Index::Kind::Range) {
      write_expr(os, idx.bounds[0]);
      os << ':';
      write_expr(os, idx.bounds[1]);
    }
  }
  os << ']';
}

void write_args(std::ostream& os, const std::vector<Expr>& args) {
  os << '(';
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) os << ", ";
    write_expr(os, args[i]);
  }
  os << ')';
}

void write_expr(std::ostream& os, const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Constant:
      os << format_number(e.value);
      break;
    case Expr::Kind::VarRef:
      os << e.name;
      write_indices(os, e.indices);
      break;
    case Expr::Kind::Apply:
      os << e.name;
      write_args(os, e.args);
      break;
    case Expr::Kind::Binary:
      os << '(';
      write_expr(os, e.args[0]);
      os << ' ' << e.name << ' ';
      write_expr(os, e.args[1]);
      os << ')';
      break;
    case Expr::Kind::Unary:
      os << '(' << e.name;
      write_expr(os, e.args[0]);
      os << ')';
      break;
  }
}

void write_statements(std::ostream& os, const std::vector<Statement>& stmts, int depth) {
  const std::string pad(static_cast<std::size_t>(2 * depth), ' ');
  for (const auto& s : stmts) {
    if (const auto* r = std::get_if<Relation>(&s.node)) {
      os << pad;
      write_expr(os, r->lhs);
      if (r->kind == Relation::Kind::Deterministic) {
        os << " <- ";
        write_expr(os, r->rhs);
      } else {
        os << " ~ " << r->distribution;
        write_args(os, r->params);
        if (r->truncation) {
          os << " T(";
          if (r->truncation->lower) write_expr(os, *r->truncation->lower);
          os << ',';
          if (r->truncation->upper) write_expr(os, *r->truncation->upper);
          os << ')';
        }
      }
      os << '\n';
    } else {
      const auto& loop = std::get<ForLoop>(s.node);
      os << pad << "for (" << loop.index << " in ";
      write_expr(os, loop.lower);
      os << ':';
      write_expr(os, loop.upper);
      os << ") {\n";
      write_statements(os, loop.body, depth + 1);
      os << pad << "}\n";
    }
  }
}

std::size_t count_in(const std::vector<Statement>& stmts) {
  std::size_t n = 0;
  for (const auto& s : stmts) {
    if (std::holds_alternative<Relation>(s.node))
      ++n;
    else
      n += count_in(std::get<ForLoop>(s.node).body);
  }
  return n;
}

}  // namespace

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind || a.name != b.name) return false;
  if (a.kind == Expr::Kind::Constant && a.value != b.value) return false;
  if (a.indices.size() != b.indices.size()) return false;
  for (std::size_t i = 0; i < a.indices.size(); ++i) {
    if (a.indices[i].kind != b.indices[i].kind) return false;
    if (!equal_exprs(a.indices[i].bounds, b.indices[i].bounds)) return false;
  }
  return equal_exprs(a.args, b.args);
}

bool structurally_equal(const ModelAST& a, const ModelAST& b) {
  return equal_statements(a.statements, b.statements);
}

std::string to_source(const Expr& e) {
  std::ostringstream os;
  write_expr(os, e);
  return os.str();
}

std::string to_source(const ModelAST& ast) {
  std::ostringstream os;
  os << "model {\n";
  write_statements(os, ast.statements, 1);
  os << "}\n";
  return os.str();
}

std::size_t count_relations(const ModelAST& ast) { return count_in(ast.statements); }

}  // namespace bugsmc
