#pragma once

// Small closed-form expression language used by metric definition files.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('+' | '-') unary | power
//   power   := primary ('^' unary)?
//   primary := number | constant | variable | func '(' expr (',' expr)* ')' | '(' expr ')'
//
// Functions: exp, expm1, log, sqrt, sin, cos, sinh, cosh, tanh, pow(a, b).
// Constants: pi, e. Variables are declared by the caller (for example "t" for
// warped profiles, "x" and "y" for disk charts).
//
// Expressions evaluate generically on double and on Jet<V, N>.

#include <cctype>
#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "anosov/jet.hpp"

namespace anosov {

class ExpressionError : public std::invalid_argument {
 public:
  ExpressionError(const std::string& what, std::size_t pos)
      : std::invalid_argument(what + " at column " + std::to_string(pos + 1)), column(pos + 1) {}
  std::size_t column;
};

class Expression {
 public:
  Expression() = default;

  static Expression parse(const std::string& text, std::vector<std::string> variables) {
    Expression e;
    e.source_ = text;
    e.variables_ = std::move(variables);
    Parser p{text, e};
    e.root_ = p.parse_expr();
    p.skip_ws();
    if (p.pos != text.size()) throw ExpressionError("unexpected '" + std::string(1, text[p.pos]) + "'", p.pos);
    return e;
  }

  const std::string& source() const { return source_; }
  const std::vector<std::string>& variables() const { return variables_; }
  bool empty() const { return nodes_.empty(); }

  template <class T>
  T operator()(std::span<const T> vars) const {
    return eval<T>(root_, vars);
  }
  template <class T>
  T operator()(const T& a) const {
    const T v[1] = {a};
    return eval<T>(root_, std::span<const T>(v, 1));
  }
  template <class T>
  T operator()(const T& a, const T& b) const {
    const T v[2] = {a, b};
    return eval<T>(root_, std::span<const T>(v, 2));
  }

  /// True when the subtree does not depend on any variable.
  bool is_constant() const { return !root_ ? true : constant(root_); }

 private:
  enum class Op { Num, Var, Add, Sub, Mul, Div, Neg, Pow, Exp, Expm1, Log, Sqrt, Sin, Cos, Sinh, Cosh, Tanh };
  struct Node {
    Op op;
    double value = 0.0;
    int var = -1;
    int lhs = -1;
    int rhs = -1;
  };

  int add(Node n) {
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }

  bool constant(int i) const {
    const Node& n = nodes_[i];
    if (n.op == Op::Var) return false;
    if (n.lhs >= 0 && !constant(n.lhs)) return false;
    if (n.rhs >= 0 && !constant(n.rhs)) return false;
    return true;
  }

  template <class T>
  T eval(int i, std::span<const T> vars) const {
    using std::cos;
    using std::cosh;
    using std::exp;
    using std::expm1;
    using std::log;
    using std::pow;
    using std::sin;
    using std::sinh;
    using std::sqrt;
    using std::tanh;
    const Node& n = nodes_[i];
    switch (n.op) {
      case Op::Num: return T(n.value);
      case Op::Var: return vars[n.var];
      case Op::Add: return eval(n.lhs, vars) + eval(n.rhs, vars);
      case Op::Sub: return eval(n.lhs, vars) - eval(n.rhs, vars);
      case Op::Mul: return eval(n.lhs, vars) * eval(n.rhs, vars);
      case Op::Div: return eval(n.lhs, vars) / eval(n.rhs, vars);
      case Op::Neg: return -eval(n.lhs, vars);
      case Op::Pow:
        if (constant(n.rhs)) return pow(eval(n.lhs, vars), value_of(eval<T>(n.rhs, vars)));
        return exp(eval(n.rhs, vars) * log(eval(n.lhs, vars)));
      case Op::Exp: return exp(eval(n.lhs, vars));
      case Op::Expm1: return expm1(eval(n.lhs, vars));
      case Op::Log: return log(eval(n.lhs, vars));
      case Op::Sqrt: return sqrt(eval(n.lhs, vars));
      case Op::Sin: return sin(eval(n.lhs, vars));
      case Op::Cos: return cos(eval(n.lhs, vars));
      case Op::Sinh: return sinh(eval(n.lhs, vars));
      case Op::Cosh: return cosh(eval(n.lhs, vars));
      case Op::Tanh: return tanh(eval(n.lhs, vars));
    }
    return T(0.0);
  }

  struct Parser {
    const std::string& s;
    Expression& e;
    std::size_t pos = 0;

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
    void expect(char c) {
      if (!accept(c)) throw ExpressionError(std::string("expected '") + c + "'", pos);
    }

    int parse_expr() {
      int lhs = parse_term();
      for (;;) {
        if (accept('+')) {
          lhs = e.add({Op::Add, 0.0, -1, lhs, parse_term()});
        } else if (accept('-')) {
          lhs = e.add({Op::Sub, 0.0, -1, lhs, parse_term()});
        } else {
          return lhs;
        }
      }
    }
    int parse_term() {
      int lhs = parse_unary();
      for (;;) {
        if (accept('*')) {
          lhs = e.add({Op::Mul, 0.0, -1, lhs, parse_unary()});
        } else if (accept('/')) {
          lhs = e.add({Op::Div, 0.0, -1, lhs, parse_unary()});
        } else {
          return lhs;
        }
      }
    }
    int parse_unary() {
      if (accept('-')) return e.add({Op::Neg, 0.0, -1, parse_unary(), -1});
      if (accept('+')) return parse_unary();
      return parse_power();
    }
    int parse_power() {
      const int base = parse_primary();
      if (accept('^')) return e.add({Op::Pow, 0.0, -1, base, parse_unary()});
      return base;
    }
    int parse_primary() {
      skip_ws();
      if (pos >= s.size()) throw ExpressionError("unexpected end of expression", pos);
      const char c = s[pos];
      if (c == '(') {
        ++pos;
        const int r = parse_expr();
        expect(')');
        return r;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        const char* begin = s.c_str() + pos;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) throw ExpressionError("malformed number", pos);
        pos += static_cast<std::size_t>(end - begin);
        return e.add({Op::Num, v});
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        const std::size_t start = pos;
        while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
        const std::string name = s.substr(start, pos - start);
        skip_ws();
        if (pos < s.size() && s[pos] == '(') {
          ++pos;
          return parse_call(name, start);
        }
        for (std::size_t i = 0; i < e.variables_.size(); ++i) {
          if (e.variables_[i] == name) return e.add({Op::Var, 0.0, static_cast<int>(i)});
        }
        if (name == "pi") return e.add({Op::Num, std::numbers::pi});
        if (name == "e") return e.add({Op::Num, std::numbers::e});
        throw ExpressionError("unknown identifier '" + name + "'", start);
      }
      throw ExpressionError(std::string("unexpected '") + c + "'", pos);
    }
    int parse_call(const std::string& name, std::size_t start) {
      static const std::pair<const char*, Op> unary[] = {
          {"exp", Op::Exp},   {"expm1", Op::Expm1}, {"log", Op::Log},   {"sqrt", Op::Sqrt}, {"sin", Op::Sin},
          {"cos", Op::Cos},   {"sinh", Op::Sinh},   {"cosh", Op::Cosh}, {"tanh", Op::Tanh}};
      if (name == "pow") {
        const int a = parse_expr();
        expect(',');
        const int b = parse_expr();
        expect(')');
        return e.add({Op::Pow, 0.0, -1, a, b});
      }
      for (const auto& [n, op] : unary) {
        if (name == n) {
          const int a = parse_expr();
          expect(')');
          return e.add({op, 0.0, -1, a, -1});
        }
      }
      throw ExpressionError("unknown function '" + name + "'", start);
    }
  };

  std::string source_;
  std::vector<std::string> variables_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace anosov
