#pragma once

#include "sdstab/expr.hpp"
#include "sdstab/simplify.hpp"

namespace sdstab {

/// Symbolic partial derivative with respect to x_var (1-based). The grammar is closed under
/// differentiation, so this never fails.
inline Expr differentiate(const Expr& e, int var) {
  if (var < 1) throw DimensionError("variable index must be positive");
  if (!e.depends_on(var)) return Expr();
  switch (e.op()) {
    case Op::Constant:
      return Expr();
    case Op::Variable:
      return e.variable_index() == var ? Expr::integer(1) : Expr();
    case Op::Neg:
      return neg(differentiate(e.arg(0), var));
    case Op::Sin:
      return mul(apply(Op::Cos, e.arg(0)), differentiate(e.arg(0), var));
    case Op::Cos:
      return neg(mul(apply(Op::Sin, e.arg(0)), differentiate(e.arg(0), var)));
    case Op::Exp:
      return mul(e, differentiate(e.arg(0), var));
    case Op::Ln:
      return div(differentiate(e.arg(0), var), e.arg(0));
    case Op::Add:
      return add(differentiate(e.arg(0), var), differentiate(e.arg(1), var));
    case Op::Sub:
      return sub(differentiate(e.arg(0), var), differentiate(e.arg(1), var));
    case Op::Mul: {
      const Expr& a = e.arg(0);
      const Expr& b = e.arg(1);
      return add(mul(differentiate(a, var), b), mul(a, differentiate(b, var)));
    }
    case Op::Div: {
      const Expr& a = e.arg(0);
      const Expr& b = e.arg(1);
      Expr da = differentiate(a, var);
      Expr db = differentiate(b, var);
      if (db.is_zero()) return div(da, b);
      return div(sub(mul(da, b), mul(a, db)), pow(b, 2));
    }
    case Op::Pow: {
      int n = e.exponent();
      const Expr& base = e.arg(0);
      return mul(mul(Expr::integer(n), pow(base, n - 1)), differentiate(base, var));
    }
  }
  return Expr();
}

}  // namespace sdstab
