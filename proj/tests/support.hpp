#pragma once

// Test-only helpers: reference systems, random expression generators and finite-difference
// oracles. Nothing here calls into the symbolic differentiation code.

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "sdstab/system.hpp"

namespace sdstab::test {

inline SystemDef double_integrator() {
  return SystemDef::from_strings(2, {"x2", "0"}, {"0", "1"}, "0.5*(x1^2+x2^2)");
}

/// Planar example with F(x1,x2) = -x1*x2^2.
inline SystemDef example1() {
  return SystemDef::from_strings(2, {"-x1*x2^2", "0"}, {"0", "1"}, "0.5*(x1^2+x2^2)");
}

/// Three-dimensional example with alpha(x3) = 1 + x3 and beta(x3) = 1.
inline SystemDef example2() {
  return SystemDef::from_strings(3, {"x2*(1+x3)", "-x1", "0"}, {"0", "0", "1"}, "0.5*(x1^2+x2^2+x3^2)");
}

/// Random polynomial expression text of bounded degree over x1..x{dim}.
inline std::string random_polynomial(std::mt19937_64& rng, int dim, int terms = 3, int max_degree = 3) {
  std::uniform_int_distribution<int> coef(-5, 5);
  std::uniform_int_distribution<int> var(1, dim);
  std::uniform_int_distribution<int> deg(0, max_degree);
  std::string s;
  for (int t = 0; t < terms; ++t) {
    int c = coef(rng);
    if (c == 0) c = 1;
    s += (t ? " + " : "") + std::string("(") + std::to_string(c) + ")";
    int d = deg(rng);
    for (int k = 0; k < d; ++k) s += "*x" + std::to_string(var(rng));
  }
  return s;
}

inline VectorField random_polynomial_field(std::mt19937_64& rng, int dim) {
  std::vector<Expr> comps;
  for (int i = 0; i < dim; ++i) comps.push_back(simplify(parse(random_polynomial(rng, dim), dim)));
  return VectorField(std::move(comps), dim);
}

/// Random expression text of depth <= depth using the full grammar. Logarithms take arguments
/// of the form 1 + (...)^2 so they are defined everywhere.
inline std::string random_expression(std::mt19937_64& rng, int dim, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 1 ? 1 : 9);
  std::uniform_int_distribution<int> var(1, dim);
  std::uniform_int_distribution<int> small(-3, 3);
  auto leaf = [&]() -> std::string {
    if (std::uniform_int_distribution<int>(0, 2)(rng) == 0) {
      int c = small(rng);
      return c < 0 ? "(" + std::to_string(c) + ")" : std::to_string(c);
    }
    return "x" + std::to_string(var(rng));
  };
  if (depth <= 1) return leaf();
  auto sub = [&] { return random_expression(rng, dim, depth - 1); };
  switch (pick(rng)) {
    case 0:
    case 1:
      return leaf();
    case 2:
      return "(" + sub() + " + " + sub() + ")";
    case 3:
      return "(" + sub() + " - " + sub() + ")";
    case 4:
      return "(" + sub() + " * " + sub() + ")";
    case 5:
      return "(" + sub() + ")^" + std::to_string(std::uniform_int_distribution<int>(0, 3)(rng));
    case 6:
      return "sin(" + sub() + ")";
    case 7:
      return "cos(" + sub() + ")";
    case 8:
      return "ln(1 + (" + sub() + ")^2)";
    default:
      return "(" + sub() + ")/(2 + sin(" + sub() + "))";
  }
}

inline EvalPoint random_point(std::mt19937_64& rng, int dim, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> p(static_cast<std::size_t>(dim));
  for (auto& v : p) v = u(rng);
  return EvalPoint(std::move(p));
}

/// Central difference d/dx_var with step h.
inline double central_difference(const std::function<double(const EvalPoint&)>& fn, const EvalPoint& p, int var,
                                 double h = 1e-5) {
  EvalPoint a = p, b = p;
  a[static_cast<std::size_t>(var - 1)] += h;
  b[static_cast<std::size_t>(var - 1)] -= h;
  return (fn(a) - fn(b)) / (2.0 * h);
}

/// Jacobian J[i][j] = dX_i/dx_j by central differences on the numeric field values.
inline std::vector<std::vector<double>> fd_jacobian(const VectorField& X, const EvalPoint& p, double h = 1e-5) {
  const auto n = static_cast<std::size_t>(X.dim());
  std::vector<std::vector<double>> J(n, std::vector<double>(n));
  for (std::size_t j = 0; j < n; ++j) {
    EvalPoint a = p, b = p;
    a[j] += h;
    b[j] -= h;
    auto fa = X(a), fb = X(b);
    for (std::size_t i = 0; i < n; ++i) J[i][j] = (fa[i] - fb[i]) / (2.0 * h);
  }
  return J;
}

/// J_Y X - J_X Y with finite-difference Jacobians.
inline std::vector<double> fd_bracket(const VectorField& X, const VectorField& Y, const EvalPoint& p,
                                      double h = 1e-5) {
  auto JX = fd_jacobian(X, p, h), JY = fd_jacobian(Y, p, h);
  auto x = X(p), y = Y(p);
  const auto n = x.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += JY[i][j] * x[j] - JX[i][j] * y[j];
  return out;
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

}  // namespace sdstab::test
