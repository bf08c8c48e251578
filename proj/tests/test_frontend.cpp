#include <doctest.h>

#include <sstream>

#include "bugsmc/bundles.hpp"
#include "bugsmc/frontend.hpp"
#include "bugsmc/lotka_volterra.hpp"
#include "bugsmc/registry.hpp"
#include "corpus.hpp"

using namespace bugsmc;

namespace {

std::vector<TokenKind> kinds(std::string_view src) {
  std::vector<TokenKind> k;
  for (const auto& t : tokenize(src)) k.push_back(t.kind);
  return k;
}

const Relation& relation(const Statement& s) { return std::get<Relation>(s.node); }

/// Line/column -> byte offset.
std::size_t offset_of(std::string_view src, SourcePos pos) {
  std::size_t off = 0;
  for (int line = 1; line < pos.line; ++line) off = src.find('\n', off) + 1;
  return off + static_cast<std::size_t>(pos.column - 1);
}

}  // namespace

TEST_SUITE("frontend") {

TEST_CASE("a stochastic relation tokenizes as ident ~ ident ( num , num )") {
  const auto toks = tokenize("x ~ dnorm(0, 1)");
  using K = TokenKind;
  CHECK(kinds("x ~ dnorm(0, 1)") == std::vector<K>{K::Identifier, K::Tilde, K::Identifier, K::LParen,
                                                    K::Number, K::Comma, K::Number, K::RParen, K::End});
  CHECK(toks[0].lexeme == "x");
  CHECK(toks[2].lexeme == "dnorm");
  CHECK(toks[6].number == 1.0);
}

TEST_CASE("truncation tokens") {
  using K = TokenKind;
  CHECK(kinds("T(-500,500)") == std::vector<K>{K::KwT, K::LParen, K::Minus, K::Number, K::Comma,
                                               K::Number, K::RParen, K::End});
}

TEST_CASE("a malformed number is a positioned lex error") {
  try {
    tokenize("x <- 1e");
    FAIL("expected LexError");
  } catch (const LexError& e) {
    CHECK(e.pos.line == 1);
    CHECK(e.pos.column == 6);
  }
  CHECK_THROWS_AS(tokenize("x <- 3 $ 4"), LexError);
}

TEST_CASE("token positions point at their lexemes") {
  for (const auto& [name, src] : test_corpus()) {
    CAPTURE(name);
    for (const auto& t : tokenize(src)) {
      if (t.kind == TokenKind::End) continue;
      CHECK(src.substr(offset_of(src, t.pos), t.lexeme.size()) == t.lexeme);
      if (t.kind == TokenKind::Number) CHECK(std::isfinite(t.number));
    }
  }
}

TEST_CASE("comments and other comparison operators") {
  using K = TokenKind;
  CHECK(kinds("a != b # trailing\n<= >= < > ==") ==
        std::vector<K>{K::Identifier, K::Ne, K::Identifier, K::Le, K::Ge, K::Lt, K::Gt, K::Eq, K::End});
}

TEST_CASE("known-parameter volatility model: four relations then a four-relation loop") {
  const ModelAST ast = parse_model(kVolatilityModel);
  REQUIRE(ast.statements.size() == 5);
  for (int i = 0; i < 4; ++i)
    CHECK(std::holds_alternative<Relation>(ast.statements[static_cast<std::size_t>(i)].node));
  const auto& loop = std::get<ForLoop>(ast.statements[4].node);
  CHECK(loop.index == "t");
  CHECK(loop.body.size() == 4);
  const Relation& x1 = relation(ast.statements[2]);
  REQUIRE(x1.truncation.has_value());
  CHECK(x1.truncation->lower.has_value());
  CHECK(x1.truncation->upper.has_value());
  // pi[c0,] keeps an empty second subscript.
  const Relation& c1 = relation(ast.statements[0]);
  REQUIRE(c1.params[0].indices.size() == 2);
  CHECK(c1.params[0].indices[1].kind == Index::Kind::Empty);
}

TEST_CASE("unknown-parameter volatility model: sixteen statements before the loop") {
  const ModelAST ast = parse_model(kVolatilityParamModel);
  REQUIRE(ast.statements.size() == 17);
  for (std::size_t i = 0; i < 16; ++i) CHECK(std::holds_alternative<Relation>(ast.statements[i].node));
  CHECK(std::holds_alternative<ForLoop>(ast.statements[16].node));
  // gamma[2] ~ dnorm(0, 1/100) T(0,)
  const Relation& g2 = relation(ast.statements[1]);
  REQUIRE(g2.truncation.has_value());
  CHECK(g2.truncation->lower.has_value());
  CHECK_FALSE(g2.truncation->upper.has_value());
}

TEST_CASE("kinetic model parses with a slice on the left") {
  const ModelAST ast = parse_model(kKineticModel);
  REQUIRE(ast.statements.size() == 3);
  const Relation& x1 = relation(ast.statements[0]);
  CHECK(x1.distribution == "LV");
  CHECK(x1.params.size() == 5);
  CHECK(x1.lhs.indices[0].kind == Index::Kind::Empty);
}

TEST_CASE("truncated input is a parse error") {
  try {
    parse_model("model { x ~ dnorm(0,1) y <- }");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.pos.line == 1);
    CHECK(e.pos.column == 29);
    CHECK(e.expected.find("expression") != std::string::npos);
  }
}

TEST_CASE("data and inits blocks are outside the grammar") {
  CHECK_THROWS_AS(parse_model("data { x <- 1 } model { y ~ dnorm(x, 1) }"), ParseError);
  CHECK_THROWS_AS(parse_model("model { y ~ dnorm(0, 1) } inits { y <- 1 }"), ParseError);
}

TEST_CASE("operator precedence and associativity") {
  auto rhs = [](const std::string& e) {
    return relation(parse_model("model { z <- " + e + " }").statements[0]).rhs;
  };
  const Expr a = Expr::var("a"), b = Expr::var("b"), c = Expr::var("c");
  // ^ binds tighter than unary minus
  CHECK(structurally_equal(rhs("-a^b"), Expr::unary("-", Expr::binary("^", a, b))));
  // ^ is right-associative
  CHECK(structurally_equal(rhs("a^b^c"), Expr::binary("^", a, Expr::binary("^", b, c))));
  // unary minus binds tighter than *
  CHECK(structurally_equal(rhs("-a*b"), Expr::binary("*", Expr::unary("-", a), b)));
  CHECK(structurally_equal(rhs("a-b-c"), Expr::binary("-", Expr::binary("-", a, b), c)));
  CHECK(structurally_equal(rhs("a+b*c"), Expr::binary("+", a, Expr::binary("*", b, c))));
  CHECK(structurally_equal(rhs("a+b==c"), Expr::binary("==", Expr::binary("+", a, b), c)));
  CHECK(structurally_equal(rhs("(a+b)*c"), Expr::binary("*", Expr::binary("+", a, b), c)));
  CHECK(structurally_equal(rhs("a^-b"), Expr::binary("^", a, Expr::unary("-", b))));
}

TEST_CASE("ifelse is an ordinary function call") {
  const Expr e = relation(parse_model("model { z <- ifelse(a == 1, b, c) }").statements[0]).rhs;
  CHECK(e.kind == Expr::Kind::Apply);
  CHECK(e.name == "ifelse");
  CHECK(e.args.size() == 3);
}

TEST_CASE("validation against the registry") {
  Registry reg = Registry::with_builtins();
  CHECK(validate_ast(parse_model("model { x ~ dnorm(0, 1) }"), reg).ok());

  const auto bad = validate_ast(parse_model("model {\n  x ~ dfoo(0, 1)\n}"), reg);
  REQUIRE(bad.violations.size() == 1);
  CHECK(bad.violations[0].message.find("dfoo") != std::string::npos);
  CHECK(bad.violations[0].pos.line == 2);
  CHECK(bad.violations[0].pos.column == 7);

  const ModelAST kinetic = parse_model(kKineticModel);
  CHECK_FALSE(validate_ast(kinetic, reg).ok());
  register_lotka_volterra(reg);
  CHECK(validate_ast(kinetic, reg).ok());

  CHECK_FALSE(validate_ast(parse_model("model { x ~ dnorm(0) }"), reg).ok());
  CHECK_FALSE(validate_ast(parse_model("model { x <- exp(1, 2) }"), reg).ok());
  CHECK_FALSE(validate_ast(parse_model("model { x <- ifelse(1, 2) }"), reg).ok());
}

TEST_CASE("pretty-printing reparses to an equal tree across the corpus") {
  for (const auto& [name, src] : test_corpus()) {
    CAPTURE(name);
    const ModelAST ast = parse_model(src);
    const std::string printed = to_source(ast);
    const ModelAST again = parse_model(printed);
    CHECK(structurally_equal(ast, again));
    CHECK(to_source(again) == printed);
  }
}

TEST_CASE("number literals survive printing exactly") {
  const ModelAST ast = parse_model("model { z <- 0.1 + 1e-300 + 2.001 + 123456789.123456789 }");
  CHECK(structurally_equal(ast, parse_model(to_source(ast))));
}

TEST_CASE("the parser is total on arbitrary and mutated input") {
  Rng rng(7);
  const std::string alphabet = "model{}()[]~<-+-*/^,:;=!<>T#xyz0123456789. \n\tfor in";
  std::size_t parsed = 0, rejected = 0;
  auto attempt = [&](const std::string& src) {
    try {
      parse_model(src);
      ++parsed;
    } catch (const LexError& e) {
      CHECK(e.pos.line >= 1);
      ++rejected;
    } catch (const ParseError& e) {
      CHECK(e.pos.line >= 1);
      ++rejected;
    }
  };
  for (int i = 0; i < 3000; ++i) {
    std::string s(rng() % 60, ' ');
    for (auto& ch : s) ch = alphabet[rng() % alphabet.size()];
    attempt(s);
  }
  for (int i = 0; i < 2000; ++i) {
    std::string s(rng() % 40, ' ');
    for (auto& ch : s) ch = static_cast<char>(rng() % 256);
    attempt(s);
  }
  for (const auto& [name, src] : test_corpus()) {
    for (int i = 0; i < 300; ++i) {
      std::string s = src;
      const int edits = 1 + static_cast<int>(rng() % 3);
      for (int e = 0; e < edits && !s.empty(); ++e) {
        const std::size_t at = rng() % s.size();
        switch (rng() % 3) {
          case 0: s.erase(at, 1); break;
          case 1: s.insert(at, 1, alphabet[rng() % alphabet.size()]); break;
          default: s[at] = alphabet[rng() % alphabet.size()];
        }
      }
      attempt(s);
    }
  }
  // Deep nesting must fail cleanly rather than overflow the stack.
  attempt("model { z <- " + std::string(100000, '(') + "1" + std::string(100000, ')') + " }");
  attempt("model { z <- " + std::string(100000, '-') + "1 }");
  CHECK(parsed > 0);
  CHECK(rejected > 0);
}

}  // TEST_SUITE
