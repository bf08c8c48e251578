#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "bugsmc/ast.hpp"
#include "bugsmc/common.hpp"

namespace bugsmc {

class Registry;

enum class TokenKind {
  Identifier,
  Number,
  KwModel,
  KwFor,
  KwIn,
  KwT,
  Tilde,
  Assign,  // <-
  LParen,
  RParen,
  LBracket,
  RBracket,
  LBrace,
  RBrace,
  Comma,
  Colon,
  Semicolon,
  Plus,
  Minus,
  Star,
  Slash,
  Caret,
  Eq,
  Ne,
  Lt,
  Le,
  Gt,
  Ge,
  End,
};

std::string_view token_kind_name(TokenKind kind);

struct Token {
  TokenKind kind = TokenKind::End;
  std::string lexeme;
  SourcePos pos;
  double number = 0.0;  // parsed value for Number tokens
};

/// Splits model source into tokens; `#` comments run to end of line.
/// The stream always ends with an End token.
std::vector<Token> tokenize(std::string_view source);

ModelAST parse_model(const std::vector<Token>& tokens);

/// tokenize + parse_model.
ModelAST parse_model(std::string_view source);

struct Violation {
  SourcePos pos;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

/// Checks distribution/function names and arities against the registry.
ValidationReport validate_ast(const ModelAST& ast, const Registry& registry);

}  // namespace bugsmc
