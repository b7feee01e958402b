#include "tsdbg/expr.hpp"

#include "tsdbg/error.hpp"

#include <cctype>
#include <charconv>
#include <limits>
#include <variant>
#include <vector>

namespace tsdbg {

enum class ExprOp { Add, Sub, Mul, Div, Mod, Eq, Ne, Lt, Le, Gt, Ge, And, Or, Not, Neg };

struct ExprNode {
  struct Literal { Value value; };
  struct Ts {};
  struct GlobalRef { std::string name; };
  struct FieldRef { std::shared_ptr<const ExprNode> base; std::string field; };
  struct Unary { ExprOp op; std::shared_ptr<const ExprNode> operand; };
  struct Binary { ExprOp op; std::shared_ptr<const ExprNode> lhs, rhs; };

  std::variant<Literal, Ts, GlobalRef, FieldRef, Unary, Binary> node;
};

namespace {

using NodePtr = std::shared_ptr<const ExprNode>;

template <class T> NodePtr make(T value) {
  return std::make_shared<const ExprNode>(ExprNode{std::move(value)});
}

[[noreturn]] void bad(const std::string &msg) { throw Error(ErrorCode::BadExpression, msg); }

struct Token {
  enum class Kind { Int, Ident, Punct, End } kind = Kind::End;
  std::string text;
  Value value = 0;
};

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j])))
        ++j;
      Token t{Token::Kind::Int, std::string(s.substr(i, j - i)), 0};
      auto [ptr, ec] = std::from_chars(s.data() + i, s.data() + j, t.value);
      if (ec != std::errc())
        bad("integer literal out of range: " + t.text);
      out.push_back(std::move(t));
      i = j;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' ||
                              s[j] == '$'))
        ++j;
      out.push_back({Token::Kind::Ident, std::string(s.substr(i, j - i)), 0});
      i = j;
    } else {
      static constexpr std::string_view two[] = {"==", "!=", "<=", ">=", "&&", "||"};
      bool matched = false;
      for (auto op : two)
        if (s.substr(i, 2) == op) {
          out.push_back({Token::Kind::Punct, std::string(op), 0});
          i += 2;
          matched = true;
          break;
        }
      if (matched)
        continue;
      if (std::string_view("+-*/%<>!().").find(c) == std::string_view::npos)
        bad(std::string("unexpected character '") + c + "'");
      out.push_back({Token::Kind::Punct, std::string(1, c), 0});
      ++i;
    }
  }
  out.push_back({Token::Kind::End, "", 0});
  return out;
}

class Parser {
public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  NodePtr parse() {
    auto n = parse_or();
    if (peek().kind != Token::Kind::End)
      bad("unexpected '" + peek().text + "'");
    return n;
  }

private:
  const Token &peek() const { return toks_[pos_]; }
  bool accept(std::string_view punct) {
    if (peek().kind == Token::Kind::Punct && peek().text == punct) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr parse_or() {
    auto lhs = parse_and();
    while (accept("||"))
      lhs = make(ExprNode::Binary{ExprOp::Or, lhs, parse_and()});
    return lhs;
  }
  NodePtr parse_and() {
    auto lhs = parse_cmp();
    while (accept("&&"))
      lhs = make(ExprNode::Binary{ExprOp::And, lhs, parse_cmp()});
    return lhs;
  }
  NodePtr parse_cmp() {
    auto lhs = parse_add();
    static constexpr std::pair<std::string_view, ExprOp> ops[] = {
        {"==", ExprOp::Eq}, {"!=", ExprOp::Ne}, {"<=", ExprOp::Le},
        {">=", ExprOp::Ge}, {"<", ExprOp::Lt},  {">", ExprOp::Gt}};
    for (auto [text, op] : ops)
      if (accept(text))
        return make(ExprNode::Binary{op, lhs, parse_add()});
    return lhs;
  }
  NodePtr parse_add() {
    auto lhs = parse_mul();
    for (;;) {
      if (accept("+"))
        lhs = make(ExprNode::Binary{ExprOp::Add, lhs, parse_mul()});
      else if (accept("-"))
        lhs = make(ExprNode::Binary{ExprOp::Sub, lhs, parse_mul()});
      else
        return lhs;
    }
  }
  NodePtr parse_mul() {
    auto lhs = parse_unary();
    for (;;) {
      if (accept("*"))
        lhs = make(ExprNode::Binary{ExprOp::Mul, lhs, parse_unary()});
      else if (accept("/"))
        lhs = make(ExprNode::Binary{ExprOp::Div, lhs, parse_unary()});
      else if (accept("%"))
        lhs = make(ExprNode::Binary{ExprOp::Mod, lhs, parse_unary()});
      else
        return lhs;
    }
  }
  NodePtr parse_unary() {
    if (accept("!"))
      return make(ExprNode::Unary{ExprOp::Not, parse_unary()});
    if (accept("-"))
      return make(ExprNode::Unary{ExprOp::Neg, parse_unary()});
    return parse_postfix();
  }
  NodePtr parse_postfix() {
    auto n = parse_primary();
    while (accept(".")) {
      if (peek().kind != Token::Kind::Ident)
        bad("expected field name after '.'");
      n = make(ExprNode::FieldRef{n, toks_[pos_++].text});
    }
    return n;
  }
  NodePtr parse_primary() {
    const auto &t = peek();
    if (t.kind == Token::Kind::Int) {
      ++pos_;
      return make(ExprNode::Literal{t.value});
    }
    if (t.kind == Token::Kind::Ident) {
      ++pos_;
      if (t.text == "ts")
        return make(ExprNode::Ts{});
      return make(ExprNode::GlobalRef{t.text});
    }
    if (accept("(")) {
      auto n = parse_or();
      if (!accept(")"))
        bad("expected ')'");
      return n;
    }
    bad(t.kind == Token::Kind::End ? "unexpected end of expression"
                                   : "unexpected '" + t.text + "'");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

void check_node(const ExprNode &n, const Program &p) {
  std::visit(
      [&](const auto &v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ExprNode::GlobalRef>) {
          if (!p.global_index(v.name))
            bad("unknown global '" + v.name + "'");
        } else if constexpr (std::is_same_v<T, ExprNode::FieldRef>) {
          check_node(*v.base, p);
        } else if constexpr (std::is_same_v<T, ExprNode::Unary>) {
          check_node(*v.operand, p);
        } else if constexpr (std::is_same_v<T, ExprNode::Binary>) {
          check_node(*v.lhs, p);
          check_node(*v.rhs, p);
        }
      },
      n.node);
}

Value eval(const ExprNode &n, const Machine &m) {
  return std::visit(
      [&](const auto &v) -> Value {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ExprNode::Literal>) {
          return v.value;
        } else if constexpr (std::is_same_v<T, ExprNode::Ts>) {
          return static_cast<Value>(m.state().tsstate.ts);
        } else if constexpr (std::is_same_v<T, ExprNode::GlobalRef>) {
          auto g = m.global(v.name);
          if (!g)
            bad("unknown global '" + v.name + "'");
          return *g;
        } else if constexpr (std::is_same_v<T, ExprNode::FieldRef>) {
          const auto h = eval(*v.base, m);
          const auto *rec = m.record(h);
          if (!rec)
            bad("field '" + v.field + "' of nil handle " + std::to_string(h));
          auto it = rec->find(v.field);
          return it == rec->end() ? 0 : it->second;
        } else if constexpr (std::is_same_v<T, ExprNode::Unary>) {
          const auto x = eval(*v.operand, m);
          return v.op == ExprOp::Not ? (x == 0 ? 1 : 0)
                                     : static_cast<Value>(0 - static_cast<std::uint64_t>(x));
        } else {
          if (v.op == ExprOp::And)
            return eval(*v.lhs, m) != 0 && eval(*v.rhs, m) != 0 ? 1 : 0;
          if (v.op == ExprOp::Or)
            return eval(*v.lhs, m) != 0 || eval(*v.rhs, m) != 0 ? 1 : 0;
          const auto a = eval(*v.lhs, m);
          const auto b = eval(*v.rhs, m);
          const auto ua = static_cast<std::uint64_t>(a), ub = static_cast<std::uint64_t>(b);
          switch (v.op) {
          case ExprOp::Add: return static_cast<Value>(ua + ub);
          case ExprOp::Sub: return static_cast<Value>(ua - ub);
          case ExprOp::Mul: return static_cast<Value>(ua * ub);
          case ExprOp::Div:
          case ExprOp::Mod:
            if (b == 0)
              bad("division by zero in expression");
            if (a == std::numeric_limits<Value>::min() && b == -1)
              return v.op == ExprOp::Div ? a : 0;
            return v.op == ExprOp::Div ? a / b : a % b;
          case ExprOp::Eq: return a == b;
          case ExprOp::Ne: return a != b;
          case ExprOp::Lt: return a < b;
          case ExprOp::Le: return a <= b;
          case ExprOp::Gt: return a > b;
          case ExprOp::Ge: return a >= b;
          default: bad("bad operator");
          }
        }
      },
      n.node);
}

} // namespace

Expr Expr::parse(std::string_view text) {
  Expr e;
  e.text_ = std::string(text);
  e.root_ = Parser(lex(text)).parse();
  return e;
}

void Expr::check(const Program &program) const { check_node(*root_, program); }

Value Expr::evaluate(const Machine &machine) const { return eval(*root_, machine); }

WriteTarget Expr::as_write_target(const Machine &machine) const {
  if (const auto *g = std::get_if<ExprNode::GlobalRef>(&root_->node)) {
    if (!machine.program().global_index(g->name))
      throw Error(ErrorCode::UnknownTarget, "unknown global '" + g->name + "'");
    return WriteTarget::global(g->name);
  }
  if (const auto *f = std::get_if<ExprNode::FieldRef>(&root_->node)) {
    Value h = 0;
    try {
      h = eval(*f->base, machine);
    } catch (const Error &e) {
      throw Error(ErrorCode::UnknownTarget, e.what());
    }
    if (!machine.record(h))
      throw Error(ErrorCode::UnknownTarget,
                  "'" + text_ + "' does not name a live record (handle " + std::to_string(h) + ")");
    return WriteTarget::field(h, f->field);
  }
  throw Error(ErrorCode::UnknownTarget, "'" + text_ + "' is not a global or field");
}

} // namespace tsdbg
