#pragma once

// Integer-valued symbolic expressions over named parameters. Used for
// container shapes, strides, map ranges, memlet subsets, and volumes.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "moviz/detail/lexer.hpp"
#include "moviz/error.hpp"

namespace moviz::sym {

using Int = std::int64_t;
using Bindings = std::map<std::string, Int, std::less<>>;

enum class Op { Literal, Symbol, Add, Sub, Mul, FloorDiv, Mod, Min, Max };

inline Int floor_div(Int a, Int b) {
  if (b == 0) throw EvalError("division by zero");
  if (a == INT64_MIN && b == -1) throw EvalError("integer overflow in division");
  Int q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

/// Result takes the sign of the divisor.
inline Int floor_mod(Int a, Int b) {
  if (b == 0) throw EvalError("modulo by zero");
  if (b == -1) return 0;
  Int r = a % b;
  if (r != 0 && ((r < 0) != (b < 0))) r += b;
  return r;
}

/// Immutable expression tree. Copies share structure; equality is structural.
class Expr {
 public:
  Expr() : Expr(literal(0)) {}

  static Expr literal(Int v) { return Expr(Node{Op::Literal, v, {}, {}}); }
  static Expr symbol(std::string name) { return Expr(Node{Op::Symbol, 0, std::move(name), {}}); }
  static Expr binary(Op op, Expr lhs, Expr rhs) {
    return Expr(Node{op, 0, {}, {std::move(lhs), std::move(rhs)}});
  }
  /// n-ary Min/Max; at least one argument.
  static Expr call(Op op, std::vector<Expr> args) {
    if (args.empty()) throw EvalError("Min/Max needs at least one argument");
    return Expr(Node{op, 0, {}, std::move(args)});
  }

  Op op() const { return node_->op; }
  Int value() const { return node_->value; }
  const std::string& name() const { return node_->name; }
  std::span<const Expr> args() const { return node_->args; }

  bool is_literal() const { return op() == Op::Literal; }
  bool is_literal(Int v) const { return is_literal() && value() == v; }

  friend bool operator==(const Expr& a, const Expr& b) {
    if (a.node_ == b.node_) return true;
    if (a.op() != b.op() || a.value() != b.value() || a.name() != b.name()) return false;
    return std::ranges::equal(a.args(), b.args());
  }

  std::string str() const {
    std::string out;
    render(out);
    return out;
  }

 private:
  struct Node {
    Op op;
    Int value;
    std::string name;
    std::vector<Expr> args;
  };

  explicit Expr(Node n) : node_(std::make_shared<const Node>(std::move(n))) {}

  static int precedence(Op op) {
    switch (op) {
      case Op::Add:
      case Op::Sub:
        return 1;
      case Op::Mul:
      case Op::FloorDiv:
      case Op::Mod:
        return 2;
      default:
        return 3;
    }
  }

  void render(std::string& out) const {
    switch (op()) {
      case Op::Literal:
        out += std::to_string(value());
        return;
      case Op::Symbol:
        out += name();
        return;
      case Op::Min:
      case Op::Max: {
        out += op() == Op::Min ? "Min(" : "Max(";
        for (std::size_t i = 0; i < args().size(); ++i) {
          if (i) out += ", ";
          args()[i].render(out);
        }
        out += ')';
        return;
      }
      default:
        break;
    }
    // Left-associative grammar: the right operand needs parentheses at equal
    // precedence, the left one only at lower precedence.
    int p = precedence(op());
    const Expr& lhs = args()[0];
    const Expr& rhs = args()[1];
    bool lp = precedence(lhs.op()) < p;
    bool rp = precedence(rhs.op()) <= p;
    if (lp) out += '(';
    lhs.render(out);
    if (lp) out += ')';
    switch (op()) {
      case Op::Add: out += " + "; break;
      case Op::Sub: out += " - "; break;
      case Op::Mul: out += "*"; break;
      case Op::FloorDiv: out += "/"; break;
      default: out += "%"; break;
    }
    if (rp) out += '(';
    rhs.render(out);
    if (rp) out += ')';
  }

  std::shared_ptr<const Node> node_;
};

inline Expr operator+(Expr a, Expr b) { return Expr::binary(Op::Add, std::move(a), std::move(b)); }
inline Expr operator-(Expr a, Expr b) { return Expr::binary(Op::Sub, std::move(a), std::move(b)); }
inline Expr operator*(Expr a, Expr b) { return Expr::binary(Op::Mul, std::move(a), std::move(b)); }
inline Expr operator/(Expr a, Expr b) { return Expr::binary(Op::FloorDiv, std::move(a), std::move(b)); }
inline Expr operator%(Expr a, Expr b) { return Expr::binary(Op::Mod, std::move(a), std::move(b)); }

namespace detail {

class ExprParser {
 public:
  explicit ExprParser(std::string_view text) : lex_(text) {}

  Expr parse_all() {
    Expr e = parse_expr();
    if (lex_.peek().kind != moviz::detail::Tok::End) {
      throw ParseError("unexpected " + moviz::detail::Lexer::describe(lex_.peek()), lex_.peek().pos);
    }
    return e;
  }

 private:
  Expr parse_expr() {
    Expr e = parse_term();
    for (;;) {
      if (lex_.accept('+')) {
        e = std::move(e) + parse_term();
      } else if (lex_.accept('-')) {
        e = std::move(e) - parse_term();
      } else {
        return e;
      }
    }
  }

  Expr parse_term() {
    Expr e = parse_unary();
    for (;;) {
      if (lex_.accept('*')) {
        e = std::move(e) * parse_unary();
      } else if (lex_.accept('/')) {
        e = std::move(e) / parse_unary();
      } else if (lex_.accept('%')) {
        e = std::move(e) % parse_unary();
      } else {
        return e;
      }
    }
  }

  // A negated literal stays a literal; any other negation becomes -1*x.
  Expr parse_unary() {
    if (lex_.accept('-')) {
      Expr inner = parse_atom();
      if (inner.is_literal()) return Expr::literal(-inner.value());
      return Expr::literal(-1) * std::move(inner);
    }
    return parse_atom();
  }

  Expr parse_atom() {
    using moviz::detail::Tok;
    const auto& t = lex_.peek();
    if (t.kind == Tok::Int) {
      Int v = 0;
      auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
      if (ec != std::errc()) throw ParseError("integer literal out of range", t.pos);
      lex_.next();
      return Expr::literal(v);
    }
    if (t.kind == Tok::Ident) {
      auto tok = lex_.next();
      if (!lex_.accept('(')) return Expr::symbol(std::string(tok.text));
      Op op;
      if (tok.text == "Min") {
        op = Op::Min;
      } else if (tok.text == "Max") {
        op = Op::Max;
      } else {
        throw ParseError("unknown operator '" + std::string(tok.text) + "'", tok.pos);
      }
      std::vector<Expr> args;
      args.push_back(parse_expr());
      while (lex_.accept(',')) args.push_back(parse_expr());
      lex_.expect(')');
      return Expr::call(op, std::move(args));
    }
    if (lex_.accept('(')) {
      Expr e = parse_expr();
      lex_.expect(')');
      return e;
    }
    throw ParseError("expected expression but found " + moviz::detail::Lexer::describe(t), t.pos);
  }

  moviz::detail::Lexer lex_;
};

inline Int checked(Op op, Int a, Int b) {
  Int r = 0;
  bool overflow = false;
  switch (op) {
    case Op::Add: overflow = __builtin_add_overflow(a, b, &r); break;
    case Op::Sub: overflow = __builtin_sub_overflow(a, b, &r); break;
    case Op::Mul: overflow = __builtin_mul_overflow(a, b, &r); break;
    case Op::FloorDiv: return floor_div(a, b);
    case Op::Mod: return floor_mod(a, b);
    default: break;
  }
  if (overflow) throw EvalError("integer overflow");
  return r;
}

}  // namespace detail

inline Expr parse_expr(std::string_view text) { return detail::ExprParser(text).parse_all(); }

/// Exact evaluation; throws EvalError naming the first unbound symbol.
inline Int evaluate(const Expr& e, const Bindings& bindings) {
  switch (e.op()) {
    case Op::Literal:
      return e.value();
    case Op::Symbol: {
      auto it = bindings.find(e.name());
      if (it == bindings.end()) throw EvalError("unbound symbol '" + e.name() + "'");
      return it->second;
    }
    case Op::Min:
    case Op::Max: {
      Int best = evaluate(e.args()[0], bindings);
      for (const auto& a : e.args().subspan(1)) {
        Int v = evaluate(a, bindings);
        best = e.op() == Op::Min ? std::min(best, v) : std::max(best, v);
      }
      return best;
    }
    default:
      return detail::checked(e.op(), evaluate(e.args()[0], bindings), evaluate(e.args()[1], bindings));
  }
}

inline void collect_symbols(const Expr& e, std::set<std::string>& out) {
  if (e.op() == Op::Symbol) {
    out.insert(e.name());
    return;
  }
  for (const auto& a : e.args()) collect_symbols(a, out);
}

inline std::set<std::string> free_symbols(const Expr& e) {
  std::set<std::string> out;
  collect_symbols(e, out);
  return out;
}

/// Constant folding plus the additive/multiplicative identities (x+0, x*1,
/// x/1). Subtrees whose evaluation would fail (e.g. 1/0) are left as-is so
/// the error still surfaces at evaluation time.
inline Expr fold(const Expr& e) {
  switch (e.op()) {
    case Op::Literal:
    case Op::Symbol:
      return e;
    case Op::Min:
    case Op::Max: {
      std::vector<Expr> args;
      bool all_const = true;
      for (const auto& a : e.args()) {
        args.push_back(fold(a));
        all_const = all_const && args.back().is_literal();
      }
      if (all_const) return Expr::literal(evaluate(Expr::call(e.op(), args), {}));
      if (args.size() == 1) return args.front();
      return Expr::call(e.op(), std::move(args));
    }
    default:
      break;
  }
  Expr lhs = fold(e.args()[0]);
  Expr rhs = fold(e.args()[1]);
  if (lhs.is_literal() && rhs.is_literal()) {
    try {
      return Expr::literal(detail::checked(e.op(), lhs.value(), rhs.value()));
    } catch (const EvalError&) {
      return Expr::binary(e.op(), lhs, rhs);
    }
  }
  switch (e.op()) {
    case Op::Add:
      if (rhs.is_literal(0)) return lhs;
      if (lhs.is_literal(0)) return rhs;
      break;
    case Op::Sub:
      if (rhs.is_literal(0)) return lhs;
      break;
    case Op::Mul:
      if (rhs.is_literal(1)) return lhs;
      if (lhs.is_literal(1)) return rhs;
      break;
    case Op::FloorDiv:
      if (rhs.is_literal(1)) return lhs;
      break;
    default:
      break;
  }
  return Expr::binary(e.op(), lhs, rhs);
}

using Substitution = std::map<std::string, Expr, std::less<>>;

inline Expr substitute(const Expr& e, const Substitution& partial) {
  struct Rec {
    const Substitution& s;
    Expr operator()(const Expr& x) const {
      switch (x.op()) {
        case Op::Literal:
          return x;
        case Op::Symbol: {
          auto it = s.find(x.name());
          return it == s.end() ? x : it->second;
        }
        case Op::Min:
        case Op::Max: {
          std::vector<Expr> args;
          for (const auto& a : x.args()) args.push_back((*this)(a));
          return Expr::call(x.op(), std::move(args));
        }
        default:
          return Expr::binary(x.op(), (*this)(x.args()[0]), (*this)(x.args()[1]));
      }
    }
  };
  return fold(Rec{partial}(e));
}

inline Expr substitute(const Expr& e, const Bindings& values) {
  Substitution s;
  for (const auto& [k, v] : values) s.emplace(k, Expr::literal(v));
  return substitute(e, s);
}

}  // namespace moviz::sym
