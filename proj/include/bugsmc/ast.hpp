#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bugsmc/common.hpp"

namespace bugsmc {

struct Index;

struct Expr {
  enum class Kind { Constant, VarRef, Apply, Binary, Unary };

  Kind kind = Kind::Constant;
  double value = 0.0;        // Constant
  std::string name;          // variable, function or operator symbol
  std::vector<Index> indices;  // VarRef; empty for an unindexed name
  std::vector<Expr> args;    // Apply arguments, Binary (lhs, rhs), Unary (operand)
  SourcePos pos;

  static Expr constant(double v, SourcePos pos = {});
  static Expr var(std::string name, std::vector<Index> indices = {}, SourcePos pos = {});
  static Expr apply(std::string fn, std::vector<Expr> args, SourcePos pos = {});
  static Expr binary(std::string op, Expr lhs, Expr rhs, SourcePos pos = {});
  static Expr unary(std::string op, Expr operand, SourcePos pos = {});
};

/// One subscript: `e`, `a:b`, or nothing (the full extent of that dimension).
struct Index {
  enum class Kind { Scalar, Range, Empty };
  Kind kind = Kind::Empty;
  std::vector<Expr> bounds;  // 1 for Scalar, 2 for Range
};

struct Truncation {
  std::optional<Expr> lower;
  std::optional<Expr> upper;
};

struct Relation {
  enum class Kind { Stochastic, Deterministic };
  Kind kind = Kind::Stochastic;
  Expr lhs;                      // always a VarRef
  std::string distribution;      // Stochastic
  SourcePos distribution_pos;
  std::vector<Expr> params;      // Stochastic
  std::optional<Truncation> truncation;
  Expr rhs;                      // Deterministic
  SourcePos pos;
};

struct Statement;

struct ForLoop {
  std::string index;
  Expr lower;
  Expr upper;
  std::vector<Statement> body;
  SourcePos pos;
};

struct Statement {
  std::variant<Relation, ForLoop> node;
};

struct ModelAST {
  std::vector<Statement> statements;
};

/// Structural equality, ignoring source positions.
bool structurally_equal(const Expr& a, const Expr& b);
bool structurally_equal(const ModelAST& a, const ModelAST& b);

/// Renders an AST back to model source that reparses to an equal tree.
std::string to_source(const Expr& e);
std::string to_source(const ModelAST& ast);

/// Number of relations after expanding nothing (loops count their body recursively).
std::size_t count_relations(const ModelAST& ast);

}  // namespace bugsmc
