#pragma once

// Tasklet language: newline- or ';'-separated assignments `name = expr`.
// Expressions follow the symbolic grammar extended with decimal literals,
// read-only subscripts on connectors (`w[1,2]`) and the intrinsic calls
// abs, min, max, sqrt, exp, tanh, fma.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "moviz/detail/lexer.hpp"
#include "moviz/error.hpp"

namespace moviz::tasklet {

struct Expr {
  enum class Kind { Number, Name, Negate, Binary, Call, Subscript };
  Kind kind = Kind::Number;
  char op = 0;       // Binary: one of + - * / %
  std::string text;  // Number literal, Name, Call callee, Subscript base
  std::vector<Expr> args;
};

struct Statement {
  std::string target;
  Expr value;
  std::size_t position = 0;
};

struct Code {
  std::vector<Statement> statements;
};

/// Operation weight of an intrinsic, or -1 if the callee is not one.
inline int intrinsic_weight(std::string_view name) {
  if (name == "fma") return 2;
  for (std::string_view n : {"abs", "min", "max", "sqrt", "exp", "tanh", "Min", "Max"}) {
    if (n == name) return 1;
  }
  return -1;
}

namespace detail {

using moviz::detail::Lexer;
using moviz::detail::Tok;

class Parser {
 public:
  explicit Parser(std::string_view src) : lex_(src, /*newlines=*/true, /*floats=*/true) {}

  Code parse() {
    Code code;
    for (;;) {
      skip_separators();
      if (lex_.peek().kind == Tok::End) break;
      code.statements.push_back(statement());
      const auto& t = lex_.peek();
      if (t.kind != Tok::End && t.kind != Tok::Newline && !lex_.at(';')) {
        throw ParseError("expected end of statement but found " + Lexer::describe(t), t.pos);
      }
    }
    return code;
  }

 private:
  void skip_separators() {
    while (lex_.peek().kind == Tok::Newline || lex_.at(';')) lex_.next();
  }

  Statement statement() {
    auto t = lex_.peek();
    if (t.kind != Tok::Ident) {
      throw ParseError("expected assignment target but found " + Lexer::describe(t), t.pos);
    }
    lex_.next();
    lex_.expect('=');
    return Statement{std::string(t.text), expr(), t.pos};
  }

  Expr expr() {
    Expr e = term();
    while (lex_.at('+') || lex_.at('-')) {
      char op = lex_.next().text[0];
      e = Expr{Expr::Kind::Binary, op, {}, {std::move(e), term()}};
    }
    return e;
  }

  Expr term() {
    Expr e = unary();
    while (lex_.at('*') || lex_.at('/') || lex_.at('%')) {
      char op = lex_.next().text[0];
      e = Expr{Expr::Kind::Binary, op, {}, {std::move(e), unary()}};
    }
    return e;
  }

  Expr unary() {
    if (lex_.accept('-')) return Expr{Expr::Kind::Negate, '-', {}, {atom()}};
    return atom();
  }

  Expr atom() {
    auto t = lex_.peek();
    if (t.kind == Tok::Int || t.kind == Tok::Float) {
      lex_.next();
      return Expr{Expr::Kind::Number, 0, std::string(t.text), {}};
    }
    if (t.kind == Tok::Ident) {
      lex_.next();
      if (lex_.accept('(')) {
        if (intrinsic_weight(t.text) < 0) {
          throw ParseError("unknown intrinsic '" + std::string(t.text) + "'", t.pos);
        }
        Expr call{Expr::Kind::Call, 0, std::string(t.text), {}};
        call.args.push_back(expr());
        while (lex_.accept(',')) call.args.push_back(expr());
        lex_.expect(')');
        if (t.text == "fma" && call.args.size() != 3) {
          throw ParseError("fma takes exactly three arguments", t.pos);
        }
        return call;
      }
      if (lex_.accept('[')) {
        Expr sub{Expr::Kind::Subscript, 0, std::string(t.text), {}};
        sub.args.push_back(expr());
        while (lex_.accept(',')) sub.args.push_back(expr());
        lex_.expect(']');
        return sub;
      }
      return Expr{Expr::Kind::Name, 0, std::string(t.text), {}};
    }
    if (lex_.accept('(')) {
      Expr e = expr();
      lex_.expect(')');
      return e;
    }
    throw ParseError("expected expression but found " + Lexer::describe(t), t.pos);
  }

  Lexer lex_;
};

inline std::int64_t count(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Number:
    case Expr::Kind::Name:
    case Expr::Kind::Subscript:  // index arithmetic is addressing, not computation
      return 0;
    case Expr::Kind::Negate:
      return count(e.args[0]);
    case Expr::Kind::Binary:
      return 1 + count(e.args[0]) + count(e.args[1]);
    case Expr::Kind::Call: {
      std::int64_t n = intrinsic_weight(e.text);
      for (const auto& a : e.args) n += count(a);
      return n;
    }
  }
  return 0;
}

}  // namespace detail

inline Code parse(std::string_view source) { return detail::Parser(source).parse(); }

/// Binary operators count 1, intrinsics 1 (fma 2); assignments, negation,
/// names and subscripts count 0.
inline std::int64_t count_arithmetic_ops(const Code& code) {
  std::int64_t n = 0;
  for (const auto& s : code.statements) n += detail::count(s.value);
  return n;
}

inline std::int64_t count_arithmetic_ops(std::string_view source) {
  return count_arithmetic_ops(parse(source));
}

}  // namespace moviz::tasklet
