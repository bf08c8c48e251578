#include "bugsmc/frontend.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "bugsmc/registry.hpp"

namespace bugsmc {

std::string_view token_kind_name(TokenKind kind) {
  switch (kind) {
    case TokenKind::Identifier: return "identifier";
    case TokenKind::Number: return "number";
    case TokenKind::KwModel: return "'model'";
    case TokenKind::KwFor: return "'for'";
    case TokenKind::KwIn: return "'in'";
    case TokenKind::KwT: return "'T'";
    case TokenKind::Tilde: return "'~'";
    case TokenKind::Assign: return "'<-'";
    case TokenKind::LParen: return "'('";
    case TokenKind::RParen: return "')'";
    case TokenKind::LBracket: return "'['";
    case TokenKind::RBracket: return "']'";
    case TokenKind::LBrace: return "'{'";
    case TokenKind::RBrace: return "'}'";
    case TokenKind::Comma: return "','";
    case TokenKind::Colon: return "':'";
    case TokenKind::Semicolon: return "';'";
    case TokenKind::Plus: return "'+'";
    case TokenKind::Minus: return "'-'";
    case TokenKind::Star: return "'*'";
    case TokenKind::Slash: return "'/'";
    case TokenKind::Caret: return "'^'";
    case TokenKind::Eq: return "'=='";
    case TokenKind::Ne: return "'!='";
    case TokenKind::Lt: return "'<'";
    case TokenKind::Le: return "'<='";
    case TokenKind::Gt: return "'>'";
    case TokenKind::Ge: return "'>='";
    case TokenKind::End: return "end of input";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Lexer

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '.';
}
bool digit(char c) { return c >= '0' && c <= '9'; }

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space_and_comments();
      Token tok;
      tok.pos = {line_, col_};
      if (at_end()) {
        tok.kind = TokenKind::End;
        out.push_back(tok);
        return out;
      }
      const char c = peek();
      if (ident_start(c)) {
        std::size_t start = i_;
        while (!at_end() && ident_char(peek())) advance();
        tok.lexeme = std::string(src_.substr(start, i_ - start));
        tok.kind = keyword(tok.lexeme);
      } else if (digit(c) || (c == '.' && digit(peek(1)))) {
        lex_number(tok);
      } else {
        lex_symbol(tok);
      }
      out.push_back(std::move(tok));
    }
  }

 private:
  static TokenKind keyword(const std::string& s) {
    if (s == "model") return TokenKind::KwModel;
    if (s == "for") return TokenKind::KwFor;
    if (s == "in") return TokenKind::KwIn;
    if (s == "T") return TokenKind::KwT;
    return TokenKind::Identifier;
  }

  bool at_end() const { return i_ >= src_.size(); }
  char peek(std::size_t k = 0) const { return i_ + k < src_.size() ? src_[i_ + k] : '\0'; }
  void advance() {
    if (src_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }

  void skip_space_and_comments() {
    while (!at_end()) {
      const char c = peek();
      if (c == '#') {
        while (!at_end() && peek() != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v') {
        advance();
      } else {
        break;
      }
    }
  }

  void lex_number(Token& tok) {
    const std::size_t start = i_;
    while (digit(peek())) advance();
    if (peek() == '.') {
      advance();
      while (digit(peek())) advance();
    }
    if (peek() == 'e' || peek() == 'E') {
      advance();
      if (peek() == '+' || peek() == '-') advance();
      if (!digit(peek())) {
        throw LexError(tok.pos, "malformed number '" +
                                    std::string(src_.substr(start, i_ - start)) + "'");
      }
      while (digit(peek())) advance();
    }
    tok.kind = TokenKind::Number;
    tok.lexeme = std::string(src_.substr(start, i_ - start));
    tok.number = std::strtod(tok.lexeme.c_str(), nullptr);
    if (!std::isfinite(tok.number))
      throw LexError(tok.pos, "number out of range '" + tok.lexeme + "'");
  }

  void lex_symbol(Token& tok) {
    const char c = peek();
    const char n = peek(1);
    auto one = [&](TokenKind k) {
      tok.kind = k;
      tok.lexeme = std::string(1, c);
      advance();
    };
    auto two = [&](TokenKind k) {
      tok.kind = k;
      tok.lexeme = std::string{c, n};
      advance();
      advance();
    };
    switch (c) {
      case '~': return one(TokenKind::Tilde);
      case '(': return one(TokenKind::LParen);
      case ')': return one(TokenKind::RParen);
      case '[': return one(TokenKind::LBracket);
      case ']': return one(TokenKind::RBracket);
      case '{': return one(TokenKind::LBrace);
      case '}': return one(TokenKind::RBrace);
      case ',': return one(TokenKind::Comma);
      case ':': return one(TokenKind::Colon);
      case ';': return one(TokenKind::Semicolon);
      case '+': return one(TokenKind::Plus);
      case '-': return one(TokenKind::Minus);
      case '*': return one(TokenKind::Star);
      case '/': return one(TokenKind::Slash);
      case '^': return one(TokenKind::Caret);
      case '<':
        if (n == '-') return two(TokenKind::Assign);
        if (n == '=') return two(TokenKind::Le);
        return one(TokenKind::Lt);
      case '>':
        if (n == '=') return two(TokenKind::Ge);
        return one(TokenKind::Gt);
      case '=':
        if (n == '=') return two(TokenKind::Eq);
        break;
      case '!':
        if (n == '=') return two(TokenKind::Ne);
        break;
      default:
        break;
    }
    std::ostringstream msg;
    if (std::isprint(static_cast<unsigned char>(c)))
      msg << "illegal character '" << c << "'";
    else
      msg << "illegal byte 0x" << std::hex << static_cast<int>(static_cast<unsigned char>(c));
    throw LexError(tok.pos, msg.str());
  }

  std::string_view src_;
  std::size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;
};

// ---------------------------------------------------------------------------
// Parser

constexpr int kMaxDepth = 256;

class Parser {
 public:
  explicit Parser(const std::vector<Token>& toks) : toks_(toks) {
    if (toks_.empty() || toks_.back().kind != TokenKind::End)
      throw ParseError({}, "token stream terminated by end of input", "unterminated stream");
  }

  ModelAST run() {
    ModelAST ast;
    expect(TokenKind::KwModel, "'model'");
    expect(TokenKind::LBrace, "'{'");
    while (!check(TokenKind::RBrace)) {
      if (check(TokenKind::End)) fail("'}' or statement");
      ast.statements.push_back(statement(0));
    }
    expect(TokenKind::RBrace, "'}'");
    expect(TokenKind::End, "end of input");
    return ast;
  }

 private:
  const Token& cur() const { return toks_[i_]; }
  bool check(TokenKind k) const { return cur().kind == k; }
  bool accept(TokenKind k) {
    if (!check(k)) return false;
    if (k != TokenKind::End) ++i_;
    return true;
  }
  const Token& expect(TokenKind k, const std::string& what) {
    if (!check(k)) fail(what);
    const Token& t = cur();
    if (k != TokenKind::End) ++i_;
    return t;
  }
  [[noreturn]] void fail(const std::string& expected) const {
    const Token& t = cur();
    std::string found = t.kind == TokenKind::End ? "end of input" : "'" + t.lexeme + "'";
    throw ParseError(t.pos, expected, found);
  }
  void guard(int depth) const {
    if (depth > kMaxDepth) fail("shallower nesting");
  }

  Statement statement(int depth) {
    guard(depth);
    if (check(TokenKind::KwFor)) return Statement{for_loop(depth)};
    Statement s{relation()};
    accept(TokenKind::Semicolon);
    return s;
  }

  ForLoop for_loop(int depth) {
    ForLoop loop;
    loop.pos = cur().pos;
    expect(TokenKind::KwFor, "'for'");
    expect(TokenKind::LParen, "'('");
    loop.index = expect(TokenKind::Identifier, "loop index name").lexeme;
    expect(TokenKind::KwIn, "'in'");
    loop.lower = expression(depth + 1);
    expect(TokenKind::Colon, "':'");
    loop.upper = expression(depth + 1);
    expect(TokenKind::RParen, "')'");
    if (accept(TokenKind::LBrace)) {
      while (!check(TokenKind::RBrace)) {
        if (check(TokenKind::End)) fail("'}' or statement");
        loop.body.push_back(statement(depth + 1));
      }
      expect(TokenKind::RBrace, "'}'");
    } else {
      loop.body.push_back(statement(depth + 1));
    }
    return loop;
  }

  Relation relation() {
    Relation r;
    r.pos = cur().pos;
    if (!check(TokenKind::Identifier)) fail("variable name or 'for'");
    r.lhs = var_ref(0);
    if (accept(TokenKind::Tilde)) {
      r.kind = Relation::Kind::Stochastic;
      const Token& name = expect(TokenKind::Identifier, "distribution name");
      r.distribution = name.lexeme;
      r.distribution_pos = name.pos;
      r.params = call_args(0);
      if (accept(TokenKind::KwT)) {
        Truncation tr;
        expect(TokenKind::LParen, "'('");
        if (!check(TokenKind::Comma)) tr.lower = expression(1);
        expect(TokenKind::Comma, "','");
        if (!check(TokenKind::RParen)) tr.upper = expression(1);
        expect(TokenKind::RParen, "')'");
        r.truncation = std::move(tr);
      }
    } else if (accept(TokenKind::Assign)) {
      r.kind = Relation::Kind::Deterministic;
      r.rhs = expression(0);
    } else {
      fail("'~' or '<-'");
    }
    return r;
  }

  Expr var_ref(int depth) {
    const Token& name = expect(TokenKind::Identifier, "variable name");
    std::vector<Index> indices;
    if (accept(TokenKind::LBracket)) {
      for (;;) {
        Index idx;
        if (check(TokenKind::Comma) || check(TokenKind::RBracket)) {
          idx.kind = Index::Kind::Empty;
        } else {
          idx.bounds.push_back(expression(depth + 1));
          if (accept(TokenKind::Colon)) {
            idx.kind = Index::Kind::Range;
            idx.bounds.push_back(expression(depth + 1));
          } else {
            idx.kind = Index::Kind::Scalar;
          }
        }
        indices.push_back(std::move(idx));
        if (accept(TokenKind::Comma)) continue;
        expect(TokenKind::RBracket, "',' or ']'");
        break;
      }
    }
    return Expr::var(name.lexeme, std::move(indices), name.pos);
  }

  std::vector<Expr> call_args(int depth) {
    std::vector<Expr> args;
    expect(TokenKind::LParen, "'('");
    if (accept(TokenKind::RParen)) return args;
    for (;;) {
      args.push_back(expression(depth + 1));
      if (accept(TokenKind::Comma)) continue;
      expect(TokenKind::RParen, "',' or ')'");
      return args;
    }
  }

  Expr expression(int depth) {
    guard(depth);
    Expr lhs = additive(depth + 1);
    for (;;) {
      const TokenKind k = cur().kind;
      if (k != TokenKind::Eq && k != TokenKind::Ne && k != TokenKind::Lt && k != TokenKind::Le &&
          k != TokenKind::Gt && k != TokenKind::Ge)
        return lhs;
      const Token& op = cur();
      ++i_;
      Expr rhs = additive(depth + 1);
      lhs = Expr::binary(op.lexeme, std::move(lhs), std::move(rhs), op.pos);
    }
  }

  Expr additive(int depth) {
    guard(depth);
    Expr lhs = multiplicative(depth + 1);
    while (check(TokenKind::Plus) || check(TokenKind::Minus)) {
      const Token& op = cur();
      ++i_;
      Expr rhs = multiplicative(depth + 1);
      lhs = Expr::binary(op.lexeme, std::move(lhs), std::move(rhs), op.pos);
    }
    return lhs;
  }

  Expr multiplicative(int depth) {
    guard(depth);
    Expr lhs = unary(depth + 1);
    while (check(TokenKind::Star) || check(TokenKind::Slash)) {
      const Token& op = cur();
      ++i_;
      Expr rhs = unary(depth + 1);
      lhs = Expr::binary(op.lexeme, std::move(lhs), std::move(rhs), op.pos);
    }
    return lhs;
  }

  Expr unary(int depth) {
    guard(depth);
    if (check(TokenKind::Minus)) {
      const Token& op = cur();
      ++i_;
      return Expr::unary("-", unary(depth + 1), op.pos);
    }
    return power(depth + 1);
  }

  // `^` binds tighter than unary minus and is right-associative; its
  // exponent may itself carry a sign (2^-1).
  Expr power(int depth) {
    guard(depth);
    Expr base = primary(depth + 1);
    if (check(TokenKind::Caret)) {
      const Token& op = cur();
      ++i_;
      Expr exponent = unary(depth + 1);
      return Expr::binary("^", std::move(base), std::move(exponent), op.pos);
    }
    return base;
  }

  Expr primary(int depth) {
    guard(depth);
    const Token& t = cur();
    if (t.kind == TokenKind::Number) {
      ++i_;
      return Expr::constant(t.number, t.pos);
    }
    if (t.kind == TokenKind::LParen) {
      ++i_;
      Expr e = expression(depth + 1);
      expect(TokenKind::RParen, "')'");
      return e;
    }
    if (t.kind == TokenKind::Identifier) {
      if (toks_[i_ + 1].kind == TokenKind::LParen) {
        ++i_;
        return Expr::apply(t.lexeme, call_args(depth + 1), t.pos);
      }
      return var_ref(depth + 1);
    }
    fail("expression");
  }

  const std::vector<Token>& toks_;
  std::size_t i_ = 0;
};

// ---------------------------------------------------------------------------
// Validation

class Validator {
 public:
  Validator(const Registry& reg, ValidationReport& rep) : reg_(reg), rep_(rep) {}

  void statements(const std::vector<Statement>& stmts) {
    for (const auto& s : stmts) {
      if (const auto* r = std::get_if<Relation>(&s.node)) {
        relation(*r);
      } else {
        const auto& loop = std::get<ForLoop>(s.node);
        expr(loop.lower);
        expr(loop.upper);
        statements(loop.body);
      }
    }
  }

 private:
  void relation(const Relation& r) {
    expr(r.lhs);
    if (r.kind == Relation::Kind::Deterministic) {
      expr(r.rhs);
      return;
    }
    const Distribution* d = reg_.find_distribution(r.distribution);
    if (!d) {
      add(r.distribution_pos, "unknown distribution '" + r.distribution + "'");
    } else if (d->arity != r.params.size()) {
      add(r.distribution_pos, "distribution '" + r.distribution + "' expects " + std::to_string(d->arity) +
                     " parameters, got " + std::to_string(r.params.size()));
    }
    for (const auto& p : r.params) expr(p);
    if (r.truncation) {
      if (r.truncation->lower) expr(*r.truncation->lower);
      if (r.truncation->upper) expr(*r.truncation->upper);
    }
  }

  void expr(const Expr& e) {
    if (e.kind == Expr::Kind::Apply) {
      const Function* f = reg_.find_function(e.name);
      if (!f) {
        add(e.pos, reg_.find_distribution(e.name)
                       ? "distribution '" + e.name + "' used as a function"
                       : "unknown function '" + e.name + "'");
      } else if (f->arity != e.args.size()) {
        add(e.pos, "function '" + e.name + "' expects " + std::to_string(f->arity) +
                       " arguments, got " + std::to_string(e.args.size()));
      }
    }
    for (const auto& a : e.args) expr(a);
    for (const auto& idx : e.indices)
      for (const auto& b : idx.bounds) expr(b);
  }

  void add(SourcePos pos, std::string msg) { rep_.violations.push_back({pos, std::move(msg)}); }

  const Registry& reg_;
  ValidationReport& rep_;
};

}  // namespace

std::vector<Token> tokenize(std::string_view source) { return Lexer(source).run(); }

ModelAST parse_model(const std::vector<Token>& tokens) { return Parser(tokens).run(); }

ModelAST parse_model(std::string_view source) { return parse_model(tokenize(source)); }

std::string ValidationReport::to_string() const {
  std::string out;
  for (const auto& v : violations) out += bugsmc::to_string(v.pos) + ": " + v.message + "\n";
  return out;
}

ValidationReport validate_ast(const ModelAST& ast, const Registry& registry) {
  ValidationReport rep;
  Validator(registry, rep).statements(ast.statements);
  return rep;
}

}  // namespace bugsmc
