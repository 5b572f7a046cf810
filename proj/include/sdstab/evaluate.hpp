#pragma once

#include <array>
#include <cmath>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "sdstab/errors.hpp"
#include "sdstab/expr.hpp"

namespace sdstab {

/// A point in R^n at which expressions are evaluated.
class EvalPoint {
 public:
  EvalPoint() = default;
  explicit EvalPoint(std::vector<double> coords) : coords_(std::move(coords)) {}
  EvalPoint(std::initializer_list<double> coords) : coords_(coords) {}

  int dim() const { return static_cast<int>(coords_.size()); }
  double operator[](std::size_t i) const { return coords_[i]; }
  double& operator[](std::size_t i) { return coords_[i]; }
  std::span<const double> coords() const { return coords_; }
  const std::vector<double>& vector() const { return coords_; }

  double norm() const {
    double s = 0.0;
    for (double c : coords_) s += c * c;
    return std::sqrt(s);
  }

  friend bool operator==(const EvalPoint&, const EvalPoint&) = default;

 private:
  std::vector<double> coords_;
};

namespace detail {

inline double checked_div(double a, double b, const Expr& at) {
  if (b == 0.0) throw DomainError("division by zero", to_string(at));
  return a / b;
}

inline double checked_ln(double a, const Expr& at) {
  if (!(a > 0.0)) throw DomainError("logarithm of nonpositive value", to_string(at));
  return std::log(a);
}

inline double checked_pow(double base, int n, const Expr& at) {
  if (n < 0 && base == 0.0) throw DomainError("division by zero", to_string(at));
  return std::pow(base, n);
}

inline double eval_rec(const Expr& e, std::span<const double> x) {
  switch (e.op()) {
    case Op::Constant:
      return e.number().value();
    case Op::Variable:
      return x[static_cast<std::size_t>(e.variable_index() - 1)];
    case Op::Neg:
      return -eval_rec(e.arg(0), x);
    case Op::Sin:
      return std::sin(eval_rec(e.arg(0), x));
    case Op::Cos:
      return std::cos(eval_rec(e.arg(0), x));
    case Op::Exp:
      return std::exp(eval_rec(e.arg(0), x));
    case Op::Ln:
      return checked_ln(eval_rec(e.arg(0), x), e);
    case Op::Add:
      return eval_rec(e.arg(0), x) + eval_rec(e.arg(1), x);
    case Op::Sub:
      return eval_rec(e.arg(0), x) - eval_rec(e.arg(1), x);
    case Op::Mul:
      return eval_rec(e.arg(0), x) * eval_rec(e.arg(1), x);
    case Op::Div: {
      double a = eval_rec(e.arg(0), x);
      return checked_div(a, eval_rec(e.arg(1), x), e);
    }
    case Op::Pow:
      return checked_pow(eval_rec(e.arg(0), x), e.exponent(), e);
  }
  return 0.0;
}

}  // namespace detail

/// Numeric value of `e` at `p`. Throws DomainError naming the offending subexpression.
inline double evaluate(const Expr& e, const EvalPoint& p) {
  if (e.max_variable() > p.dim())
    throw DimensionError("expression uses x" + std::to_string(e.max_variable()) + " but point has dimension " +
                         std::to_string(p.dim()));
  return detail::eval_rec(e, p.coords());
}

/// Flattened postfix form of an expression for repeated evaluation (ODE right-hand sides).
/// Produces bit-identical results to evaluate() for the same tree.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  explicit CompiledExpr(const Expr& e) : max_var_(e.max_variable()) {
    int depth = 0;
    emit(e, depth);
  }

  int max_variable() const { return max_var_; }

  double operator()(std::span<const double> x) const {
    constexpr std::size_t kInline = 48;
    if (max_depth_ <= kInline) {
      std::array<double, kInline> stack;
      return run(x, stack.data());
    }
    std::vector<double> stack(max_depth_);
    return run(x, stack.data());
  }

 private:
  struct Instr {
    Op op;
    int var;  // variable index (0-based) or exponent
    double value;
    int origin;  // index into origins_ for ops that can raise domain errors
  };

  void emit(const Expr& e, int& depth) {
    switch (e.op()) {
      case Op::Constant:
        code_.push_back({Op::Constant, 0, e.number().value(), -1});
        bump(depth, +1);
        return;
      case Op::Variable:
        code_.push_back({Op::Variable, e.variable_index() - 1, 0.0, -1});
        bump(depth, +1);
        return;
      case Op::Pow:
        emit(e.arg(0), depth);
        code_.push_back({Op::Pow, e.exponent(), 0.0, origin(e)});
        return;
      default:
        break;
    }
    for (std::size_t i = 0; i < e.arity(); ++i) emit(e.arg(i), depth);
    int org = (e.op() == Op::Div || e.op() == Op::Ln) ? origin(e) : -1;
    code_.push_back({e.op(), 0, 0.0, org});
    if (e.arity() == 2) bump(depth, -1);
  }

  int origin(const Expr& e) {
    origins_.push_back(e);
    return static_cast<int>(origins_.size() - 1);
  }

  void bump(int& depth, int delta) {
    depth += delta;
    if (static_cast<std::size_t>(depth) > max_depth_) max_depth_ = static_cast<std::size_t>(depth);
  }

  double run(std::span<const double> x, double* s) const {
    std::size_t top = 0;
    for (const Instr& in : code_) {
      switch (in.op) {
        case Op::Constant:
          s[top++] = in.value;
          break;
        case Op::Variable:
          s[top++] = x[static_cast<std::size_t>(in.var)];
          break;
        case Op::Neg:
          s[top - 1] = -s[top - 1];
          break;
        case Op::Sin:
          s[top - 1] = std::sin(s[top - 1]);
          break;
        case Op::Cos:
          s[top - 1] = std::cos(s[top - 1]);
          break;
        case Op::Exp:
          s[top - 1] = std::exp(s[top - 1]);
          break;
        case Op::Ln:
          s[top - 1] = detail::checked_ln(s[top - 1], origins_[static_cast<std::size_t>(in.origin)]);
          break;
        case Op::Pow:
          s[top - 1] = detail::checked_pow(s[top - 1], in.var, origins_[static_cast<std::size_t>(in.origin)]);
          break;
        case Op::Add:
          --top;
          s[top - 1] = s[top - 1] + s[top];
          break;
        case Op::Sub:
          --top;
          s[top - 1] = s[top - 1] - s[top];
          break;
        case Op::Mul:
          --top;
          s[top - 1] = s[top - 1] * s[top];
          break;
        case Op::Div:
          --top;
          s[top - 1] = detail::checked_div(s[top - 1], s[top], origins_[static_cast<std::size_t>(in.origin)]);
          break;
      }
    }
    return s[0];
  }

  std::vector<Instr> code_;
  std::vector<Expr> origins_;
  std::size_t max_depth_ = 1;
  int max_var_ = 0;
};

}  // namespace sdstab
