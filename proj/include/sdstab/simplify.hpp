#pragma once

// Rewriting constructors and bottom-up simplification. Every rewrite is value-preserving
// wherever the original expression is defined; there is no canonical form.

#include <cmath>
#include <utility>

#include "sdstab/expr.hpp"

namespace sdstab {

Expr add(const Expr& a, const Expr& b);
Expr sub(const Expr& a, const Expr& b);
Expr mul(const Expr& a, const Expr& b);
Expr div(const Expr& a, const Expr& b);
Expr neg(const Expr& a);
Expr pow(const Expr& a, int exponent);
Expr apply(Op func, const Expr& a);

namespace detail {

// e == coefficient * term, with the coefficient pulled from a leading constant factor or negation.
inline std::pair<Number, Expr> split_coefficient(const Expr& e) {
  if (e.op() == Op::Mul && e.arg(0).is_constant()) return {e.arg(0).number(), e.arg(1)};
  if (e.op() == Op::Neg) {
    auto [c, t] = split_coefficient(e.arg(0));
    return {-c, t};
  }
  return {Rational(1), e};
}

inline std::pair<Expr, int> split_power(const Expr& e) {
  if (e.op() == Op::Pow) return {e.arg(0), e.exponent()};
  return {e, 1};
}

inline Expr scaled(const Number& c, const Expr& term) {
  if (c.is_zero()) return Expr();
  if (c.is_one()) return term;
  return mul(Expr(c), term);
}

}  // namespace detail

inline Expr neg(const Expr& a) {
  switch (a.op()) {
    case Op::Constant:
      return Expr(-a.number());
    case Op::Neg:
      return a.arg(0);
    case Op::Mul:
      if (a.arg(0).is_constant()) return detail::scaled(-a.arg(0).number(), a.arg(1));
      break;
    case Op::Sub:
      return sub(a.arg(1), a.arg(0));
    default:
      break;
  }
  return Expr::unary(Op::Neg, a);
}

inline Expr add(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr(a.number() + b.number());
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  if (b.op() == Op::Neg) return sub(a, b.arg(0));
  if (a.op() == Op::Neg) return sub(b, a.arg(0));
  auto [ca, ta] = detail::split_coefficient(a);
  auto [cb, tb] = detail::split_coefficient(b);
  if (structurally_equal(ta, tb)) return detail::scaled(ca + cb, ta);
  if (a.is_constant()) return Expr::binary(Op::Add, b, a);
  return Expr::binary(Op::Add, a, b);
}

inline Expr sub(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr(a.number() - b.number());
  if (b.is_zero()) return a;
  if (a.is_zero()) return neg(b);
  if (b.op() == Op::Neg) return add(a, b.arg(0));
  auto [ca, ta] = detail::split_coefficient(a);
  auto [cb, tb] = detail::split_coefficient(b);
  if (structurally_equal(ta, tb)) return detail::scaled(ca - cb, ta);
  return Expr::binary(Op::Sub, a, b);
}

inline Expr mul(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr(a.number() * b.number());
  if (a.is_zero() || b.is_zero()) return Expr();
  if (a.is_one()) return b;
  if (b.is_one()) return a;
  if (b.is_constant()) return mul(b, a);
  if (a.op() == Op::Neg) return neg(mul(a.arg(0), b));
  if (b.op() == Op::Neg) return neg(mul(a, b.arg(0)));
  if (a.is_constant()) {
    if (a.number() == Number(Rational(-1))) return neg(b);
    if (b.op() == Op::Mul && b.arg(0).is_constant()) return mul(Expr(a.number() * b.arg(0).number()), b.arg(1));
    return Expr::binary(Op::Mul, a, b);
  }
  // Pull constants to the front: (c*s)*t -> c*(s*t), s*(c*t) -> c*(s*t).
  if (a.op() == Op::Mul && a.arg(0).is_constant()) return mul(a.arg(0), mul(a.arg(1), b));
  if (b.op() == Op::Mul && b.arg(0).is_constant()) return mul(b.arg(0), mul(a, b.arg(1)));
  auto [ba, ea] = detail::split_power(a);
  auto [bb, eb] = detail::split_power(b);
  if (structurally_equal(ba, bb)) return pow(ba, ea + eb);
  return Expr::binary(Op::Mul, a, b);
}

inline Expr div(const Expr& a, const Expr& b) {
  if (b.is_zero()) throw DomainError("division by literal zero", to_string(a) + "/0");
  if (a.is_zero()) return Expr();
  if (b.is_one()) return a;
  if (b.is_constant()) return mul(Expr(Number(Rational(1)) / b.number()), a);
  if (a.op() == Op::Neg) return neg(div(a.arg(0), b));
  if (b.op() == Op::Neg) return neg(div(a, b.arg(0)));
  auto [ba, ea] = detail::split_power(a);
  auto [bb, eb] = detail::split_power(b);
  if (structurally_equal(ba, bb)) return pow(ba, ea - eb);
  return Expr::binary(Op::Div, a, b);
}

inline Expr pow(const Expr& a, int exponent) {
  if (exponent == 0) return Expr::integer(1);
  if (exponent == 1) return a;
  if (a.is_constant()) {
    if (a.number().is_zero() && exponent < 0) throw DomainError("zero raised to a negative power", to_string(a));
    return Expr(a.number().pow(exponent));
  }
  if (a.op() == Op::Pow) return pow(a.arg(0), a.exponent() * exponent);
  if (a.op() == Op::Neg) {
    Expr inner = pow(a.arg(0), exponent);
    return exponent % 2 == 0 ? inner : neg(inner);
  }
  return Expr::power(a, exponent);
}

inline Expr apply(Op func, const Expr& a) {
  if (a.is_constant()) {
    const Number& c = a.number();
    switch (func) {
      case Op::Neg:
        return Expr(-c);
      case Op::Sin:
        return c.is_zero() ? Expr() : Expr(Number::real(std::sin(c.value())));
      case Op::Cos:
        return c.is_zero() ? Expr::integer(1) : Expr(Number::real(std::cos(c.value())));
      case Op::Exp:
        return c.is_zero() ? Expr::integer(1) : Expr(Number::real(std::exp(c.value())));
      case Op::Ln:
        if (c.is_one()) return Expr();
        if (c.value() > 0.0) return Expr(Number::real(std::log(c.value())));
        break;  // left for evaluation to report
      default:
        break;
    }
  }
  if (func == Op::Neg) return neg(a);
  return Expr::unary(func, a);
}

/// Rebuilds `e` bottom-up through the rewriting constructors. Folds constants and removes
/// 0*a, a+-0, 1*a, a^1, a^0 among other local identities.
inline Expr simplify(const Expr& e) {
  switch (e.op()) {
    case Op::Constant:
    case Op::Variable:
      return e;
    case Op::Neg:
    case Op::Sin:
    case Op::Cos:
    case Op::Exp:
    case Op::Ln:
      return apply(e.op(), simplify(e.arg(0)));
    case Op::Add:
      return add(simplify(e.arg(0)), simplify(e.arg(1)));
    case Op::Sub:
      return sub(simplify(e.arg(0)), simplify(e.arg(1)));
    case Op::Mul:
      return mul(simplify(e.arg(0)), simplify(e.arg(1)));
    case Op::Div:
      return div(simplify(e.arg(0)), simplify(e.arg(1)));
    case Op::Pow:
      return pow(simplify(e.arg(0)), e.exponent());
  }
  return e;
}

inline Expr operator+(const Expr& a, const Expr& b) { return add(a, b); }
inline Expr operator-(const Expr& a, const Expr& b) { return sub(a, b); }
inline Expr operator*(const Expr& a, const Expr& b) { return mul(a, b); }
inline Expr operator/(const Expr& a, const Expr& b) { return div(a, b); }
inline Expr operator-(const Expr& a) { return neg(a); }

}  // namespace sdstab
