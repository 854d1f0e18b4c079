#pragma once

// Scalar arithmetic expressions over the slow variable x and the fast
// variables y_i, used by the "expression" coefficient family.
//
// Grammar:
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?
//   primary := number | 'pi' | variable | func '(' expr ')' | '(' expr ')'
//
// Variables: x1..x3 (slow), y<level>_<axis> (fast, e.g. y1_1, y2_3).
// Functions: sin cos tan exp log sqrt abs tanh.

#include <cctype>
#include <cmath>
#include <memory>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <utility>

#include "mshom/errors.hpp"

namespace mshom {

/// Variable reference: group 0 is x, group i >= 1 is y_i; axis is 0-based.
struct VarRef {
  int group;
  int axis;
  auto operator<=>(const VarRef&) const = default;
};

class Expression {
 public:
  Expression() = default;

  static Expression parse(const std::string& text) {
    Parser p{text, 0, {}};
    Expression e;
    e.text_ = text;
    e.root_ = p.parse_expr();
    p.skip_ws();
    if (p.pos != text.size())
      detail::fail_validation("expression: unexpected '" + text.substr(p.pos, 1) + "' at offset " + std::to_string(p.pos) + " in \"" + text + "\"");
    e.vars_ = std::move(p.vars);
    return e;
  }

  bool empty() const { return !root_; }
  const std::string& text() const { return text_; }
  const std::set<VarRef>& variables() const { return vars_; }

  /// `x` holds the slow point; `ys[i]` the fast point of level i+1.
  double evaluate(std::span<const double> x, std::span<const std::span<const double>> ys) const {
    if (!root_) return 0.0;
    return root_->eval(x, ys);
  }

 private:
  enum class Op { Num, Var, Add, Sub, Mul, Div, Pow, Neg, Fn };
  enum class Fn { Sin, Cos, Tan, Exp, Log, Sqrt, Abs, Tanh };

  struct Node {
    Op op = Op::Num;
    double value = 0.0;
    VarRef var{0, 0};
    Fn fn = Fn::Sin;
    std::shared_ptr<const Node> lhs, rhs;

    double eval(std::span<const double> x, std::span<const std::span<const double>> ys) const {
      switch (op) {
        case Op::Num:
          return value;
        case Op::Var: {
          if (var.group == 0) return static_cast<std::size_t>(var.axis) < x.size() ? x[var.axis] : 0.0;
          const auto g = static_cast<std::size_t>(var.group - 1);
          if (g >= ys.size() || static_cast<std::size_t>(var.axis) >= ys[g].size()) return 0.0;
          return ys[g][var.axis];
        }
        case Op::Add:
          return lhs->eval(x, ys) + rhs->eval(x, ys);
        case Op::Sub:
          return lhs->eval(x, ys) - rhs->eval(x, ys);
        case Op::Mul:
          return lhs->eval(x, ys) * rhs->eval(x, ys);
        case Op::Div:
          return lhs->eval(x, ys) / rhs->eval(x, ys);
        case Op::Pow:
          return std::pow(lhs->eval(x, ys), rhs->eval(x, ys));
        case Op::Neg:
          return -lhs->eval(x, ys);
        case Op::Fn: {
          const double a = lhs->eval(x, ys);
          switch (fn) {
            case Fn::Sin: return std::sin(a);
            case Fn::Cos: return std::cos(a);
            case Fn::Tan: return std::tan(a);
            case Fn::Exp: return std::exp(a);
            case Fn::Log: return std::log(a);
            case Fn::Sqrt: return std::sqrt(a);
            case Fn::Abs: return std::abs(a);
            case Fn::Tanh: return std::tanh(a);
          }
        }
      }
      return 0.0;
    }
  };
  using NodePtr = std::shared_ptr<const Node>;

  struct Parser {
    const std::string& s;
    std::size_t pos;
    std::set<VarRef> vars;

    void skip_ws() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool accept(char c) {
      skip_ws();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }
    [[noreturn]] void fail(const std::string& msg) const {
      detail::fail_validation("expression: " + msg + " at offset " + std::to_string(pos) + " in \"" + s + "\"");
    }
    static NodePtr binary(Op op, NodePtr a, NodePtr b) {
      auto n = std::make_shared<Node>();
      n->op = op;
      n->lhs = std::move(a);
      n->rhs = std::move(b);
      return n;
    }

    NodePtr parse_expr() {
      NodePtr lhs = parse_term();
      for (;;) {
        if (accept('+')) lhs = binary(Op::Add, lhs, parse_term());
        else if (accept('-')) lhs = binary(Op::Sub, lhs, parse_term());
        else return lhs;
      }
    }
    NodePtr parse_term() {
      NodePtr lhs = parse_unary();
      for (;;) {
        if (accept('*')) lhs = binary(Op::Mul, lhs, parse_unary());
        else if (accept('/')) lhs = binary(Op::Div, lhs, parse_unary());
        else return lhs;
      }
    }
    NodePtr parse_unary() {
      if (accept('-')) return binary(Op::Neg, parse_unary(), nullptr);
      if (accept('+')) return parse_unary();
      return parse_power();
    }
    NodePtr parse_power() {
      NodePtr base = parse_primary();
      if (accept('^')) return binary(Op::Pow, base, parse_unary());
      return base;
    }
    NodePtr parse_primary() {
      skip_ws();
      if (pos >= s.size()) fail("unexpected end");
      if (accept('(')) {
        NodePtr e = parse_expr();
        if (!accept(')')) fail("expected ')'");
        return e;
      }
      const char c = s[pos];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(s.substr(pos), &used);
        } catch (const std::exception&) {
          fail("bad number");
        }
        pos += used;
        auto n = std::make_shared<Node>();
        n->value = v;
        return n;
      }
      if (!std::isalpha(static_cast<unsigned char>(c))) fail("unexpected character");
      const std::size_t start = pos;
      while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
      const std::string id = s.substr(start, pos - start);
      if (id == "pi") {
        auto n = std::make_shared<Node>();
        n->value = std::numbers::pi;
        return n;
      }
      static const std::pair<const char*, Fn> fns[] = {{"sin", Fn::Sin},   {"cos", Fn::Cos},   {"tan", Fn::Tan},
                                                       {"exp", Fn::Exp},   {"log", Fn::Log},   {"sqrt", Fn::Sqrt},
                                                       {"abs", Fn::Abs},   {"tanh", Fn::Tanh}};
      for (const auto& [name, fn] : fns) {
        if (id == name) {
          if (!accept('(')) fail("expected '(' after " + id);
          auto n = std::make_shared<Node>();
          n->op = Op::Fn;
          n->fn = fn;
          n->lhs = parse_expr();
          if (!accept(')')) fail("expected ')'");
          return n;
        }
      }
      auto n = std::make_shared<Node>();
      n->op = Op::Var;
      if (id.size() == 2 && id[0] == 'x' && id[1] >= '1' && id[1] <= '3') {
        n->var = {0, id[1] - '1'};
      } else if (id.size() >= 4 && id[0] == 'y') {
        const auto us = id.find('_');
        if (us == std::string::npos || us < 2 || us + 1 >= id.size()) fail("bad variable '" + id + "'");
        int level = 0, axis = 0;
        try {
          level = std::stoi(id.substr(1, us - 1));
          axis = std::stoi(id.substr(us + 1));
        } catch (const std::exception&) {
          fail("bad variable '" + id + "'");
        }
        if (level < 1 || axis < 1 || axis > 3) fail("bad variable '" + id + "'");
        n->var = {level, axis - 1};
      } else {
        fail("unknown identifier '" + id + "'");
      }
      vars.insert(n->var);
      return n;
    }
  };

  std::string text_;
  NodePtr root_;
  std::set<VarRef> vars_;
};

}  // namespace mshom
