#pragma once

// Immutable scalar expression trees over state variables x1..xn.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "sdstab/errors.hpp"
#include "sdstab/rational.hpp"

namespace sdstab {

enum class Op : std::uint8_t { Constant, Variable, Neg, Sin, Cos, Exp, Ln, Add, Sub, Mul, Div, Pow };

constexpr bool is_unary(Op op) { return op >= Op::Neg && op <= Op::Ln; }
constexpr bool is_binary(Op op) { return op >= Op::Add && op <= Op::Div; }

/// A constant: an exact rational while arithmetic stays representable, a double otherwise.
class Number {
 public:
  Number() = default;
  Number(Rational q) : exact_(true), q_(q), value_(q.to_double()) {}  // NOLINT
  static Number real(double v) {
    Number n;
    n.exact_ = false;
    n.value_ = v;
    return n;
  }
  /// Floats that are small integers are kept exact so zero/one detection stays reliable.
  static Number from_double(double v) {
    if (std::nearbyint(v) == v && std::fabs(v) < 9.0e15) return Rational(static_cast<std::int64_t>(v));
    return real(v);
  }

  bool is_exact() const { return exact_; }
  const Rational& rational() const { return q_; }
  double value() const { return value_; }
  bool is_zero() const { return exact_ ? q_.is_zero() : value_ == 0.0; }
  bool is_one() const { return exact_ ? q_.is_one() : value_ == 1.0; }
  bool is_negative() const { return value_ < 0.0; }

  friend Number operator+(const Number& a, const Number& b) {
    if (a.exact_ && b.exact_)
      if (auto r = a.q_ + b.q_) return *r;
    return real(a.value_ + b.value_);
  }
  friend Number operator-(const Number& a, const Number& b) {
    if (a.exact_ && b.exact_)
      if (auto r = a.q_ - b.q_) return *r;
    return real(a.value_ - b.value_);
  }
  friend Number operator*(const Number& a, const Number& b) {
    if (a.exact_ && b.exact_)
      if (auto r = a.q_ * b.q_) return *r;
    return real(a.value_ * b.value_);
  }
  /// Caller guarantees b is nonzero.
  friend Number operator/(const Number& a, const Number& b) {
    if (a.exact_ && b.exact_)
      if (auto r = a.q_ / b.q_) return *r;
    return real(a.value_ / b.value_);
  }
  Number operator-() const {
    if (exact_)
      if (auto r = q_.negated()) return *r;
    return real(-value_);
  }
  Number pow(int exponent) const {
    if (exact_)
      if (auto r = q_.pow(exponent)) return *r;
    return real(std::pow(value_, exponent));
  }

  friend bool operator==(const Number& a, const Number& b) {
    if (a.exact_ && b.exact_) return a.q_ == b.q_;
    return a.exact_ == b.exact_ && a.value_ == b.value_;
  }

  std::string to_string() const {
    if (exact_) return q_.to_string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value_);
    std::string s(buf);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
  }

 private:
  bool exact_ = true;
  Rational q_{};
  double value_ = 0.0;
};

class Expr {
 public:
  Expr() : Expr(Number{}) {}
  Expr(Number n) : node_(std::make_shared<Node>(Node{Op::Constant, n, 0, 0, {}, 0, 1})) {}  // NOLINT
  static Expr constant(double v) { return Expr(Number::from_double(v)); }
  static Expr integer(std::int64_t v) { return Expr(Number(Rational(v))); }

  /// 1-based variable index.
  static Expr variable(int index) {
    if (index < 1) throw DimensionError("variable index must be positive");
    std::uint64_t mask = index <= 64 ? (std::uint64_t{1} << (index - 1)) : ~std::uint64_t{0};
    return Expr(std::make_shared<Node>(Node{Op::Variable, {}, index, 0, {}, mask, 1}));
  }

  // Raw constructors; no rewriting. Use the builders in simplify.hpp for rewriting construction.
  static Expr unary(Op op, Expr a) {
    if (!is_unary(op)) throw Error("not a unary operator");
    auto mask = a.node_->vars;
    auto size = a.node_->size + 1;
    return Expr(std::make_shared<Node>(Node{op, {}, 0, 0, {std::move(a)}, mask, size}));
  }
  static Expr binary(Op op, Expr a, Expr b) {
    if (!is_binary(op)) throw Error("not a binary operator");
    if (op == Op::Div && b.is_constant() && b.number().is_zero())
      throw DomainError("division by literal zero", to_string_of(a) + "/0");
    auto mask = a.node_->vars | b.node_->vars;
    auto size = a.node_->size + b.node_->size + 1;
    return Expr(std::make_shared<Node>(Node{op, {}, 0, 0, {std::move(a), std::move(b)}, mask, size}));
  }
  static Expr power(Expr base, int exponent) {
    auto mask = base.node_->vars;
    auto size = base.node_->size + 1;
    return Expr(std::make_shared<Node>(Node{Op::Pow, {}, 0, exponent, {std::move(base)}, mask, size}));
  }

  Op op() const { return node_->op; }
  bool is_constant() const { return node_->op == Op::Constant; }
  bool is_zero() const { return is_constant() && node_->number.is_zero(); }
  bool is_one() const { return is_constant() && node_->number.is_one(); }
  const Number& number() const { return node_->number; }
  int variable_index() const { return node_->var; }
  int exponent() const { return node_->exponent; }
  std::size_t arity() const { return node_->args.size(); }
  const Expr& arg(std::size_t i) const { return node_->args[i]; }
  std::size_t size() const { return node_->size; }

  /// Whether x_index may occur in the tree (exact for index <= 64).
  bool depends_on(int index) const {
    if (index > 64) return node_->vars != 0;
    return (node_->vars >> (index - 1)) & 1U;
  }

  /// Largest variable index present, 0 for constant trees.
  int max_variable() const {
    int best = 0;
    visit_vars(*this, best);
    return best;
  }

  bool same_node(const Expr& other) const { return node_ == other.node_; }

  friend std::string to_string(const Expr& e) { return to_string_of(e); }

 private:
  struct Node {
    Op op;
    Number number;
    int var;
    int exponent;
    std::vector<Expr> args;
    std::uint64_t vars;
    std::size_t size;
  };

  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  static void visit_vars(const Expr& e, int& best) {
    if (e.node_->vars == 0) return;
    if (e.op() == Op::Variable) {
      best = std::max(best, e.variable_index());
      return;
    }
    for (const auto& a : e.node_->args) visit_vars(a, best);
  }

  static int precedence(const Expr& e) {
    switch (e.op()) {
      case Op::Add:
      case Op::Sub:
        return 1;
      case Op::Mul:
      case Op::Div:
        return 2;
      case Op::Neg:
        return 3;
      case Op::Pow:
        return 4;
      case Op::Constant:
        if (e.number().is_negative()) return 3;
        if (e.number().is_exact() && !e.number().rational().is_integer()) return 2;
        return 5;
      default:
        return 5;
    }
  }

  static std::string wrap(const Expr& e, int min_prec) {
    std::string s = to_string_of(e);
    return precedence(e) < min_prec ? "(" + s + ")" : s;
  }

  static std::string to_string_of(const Expr& e) {
    switch (e.op()) {
      case Op::Constant:
        return e.number().to_string();
      case Op::Variable:
        return "x" + std::to_string(e.variable_index());
      case Op::Neg:
        return "-" + wrap(e.arg(0), 4);
      case Op::Sin:
        return "sin(" + to_string_of(e.arg(0)) + ")";
      case Op::Cos:
        return "cos(" + to_string_of(e.arg(0)) + ")";
      case Op::Exp:
        return "exp(" + to_string_of(e.arg(0)) + ")";
      case Op::Ln:
        return "ln(" + to_string_of(e.arg(0)) + ")";
      case Op::Add:
        return wrap(e.arg(0), 1) + " + " + wrap(e.arg(1), 2);
      case Op::Sub:
        return wrap(e.arg(0), 1) + " - " + wrap(e.arg(1), 2);
      case Op::Mul:
        return wrap(e.arg(0), 2) + "*" + wrap(e.arg(1), 3);
      case Op::Div:
        return wrap(e.arg(0), 2) + "/" + wrap(e.arg(1), 3);
      case Op::Pow: {
        std::string ex = std::to_string(e.exponent());
        return wrap(e.arg(0), 5) + "^" + (e.exponent() < 0 ? "(" + ex + ")" : ex);
      }
    }
    return "?";
  }

  std::shared_ptr<const Node> node_;
};

/// Structural equality of trees (constants compared by value and exactness).
inline bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.same_node(b)) return true;
  if (a.op() != b.op() || a.size() != b.size()) return false;
  switch (a.op()) {
    case Op::Constant:
      return a.number() == b.number();
    case Op::Variable:
      return a.variable_index() == b.variable_index();
    case Op::Pow:
      return a.exponent() == b.exponent() && structurally_equal(a.arg(0), b.arg(0));
    default:
      for (std::size_t i = 0; i < a.arity(); ++i)
        if (!structurally_equal(a.arg(i), b.arg(i))) return false;
      return true;
  }
}

}  // namespace sdstab
