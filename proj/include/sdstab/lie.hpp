#pragma once

// Vector-field calculus. Conventions: XY := (DY)X, so the derivative of a scalar field V along X
// is (DV)X and the bracket is [X,Y] = (DY)X - (DX)Y.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sdstab/symcalc.hpp"

namespace sdstab {

class ScalarField {
 public:
  ScalarField(Expr body, int dim) : body_(std::move(body)), dim_(dim) {
    if (dim_ < 1) throw DimensionError("dimension must be positive");
    if (body_.max_variable() > dim_)
      throw DimensionError("scalar field uses x" + std::to_string(body_.max_variable()) + " beyond dimension " +
                           std::to_string(dim_));
  }

  const Expr& body() const { return body_; }
  int dim() const { return dim_; }
  double operator()(const EvalPoint& p) const { return evaluate(body_, p); }

 private:
  Expr body_;
  int dim_;
};

class VectorField {
 public:
  VectorField(std::vector<Expr> components, int dim) : components_(std::move(components)), dim_(dim) {
    if (dim_ < 1) throw DimensionError("dimension must be positive");
    if (static_cast<int>(components_.size()) != dim_)
      throw DimensionError("vector field has " + std::to_string(components_.size()) + " components but dimension " +
                           std::to_string(dim_));
    for (const auto& c : components_)
      if (c.max_variable() > dim_)
        throw DimensionError("component uses x" + std::to_string(c.max_variable()) + " beyond dimension " +
                             std::to_string(dim_));
  }

  static VectorField zero(int dim) { return VectorField(std::vector<Expr>(static_cast<std::size_t>(dim)), dim); }

  int dim() const { return dim_; }
  const Expr& operator[](std::size_t i) const { return components_[i]; }
  const std::vector<Expr>& components() const { return components_; }

  bool is_zero() const {
    for (const auto& c : components_)
      if (!c.is_zero()) return false;
    return true;
  }

  std::vector<double> operator()(const EvalPoint& p) const {
    std::vector<double> out;
    out.reserve(components_.size());
    for (const auto& c : components_) out.push_back(evaluate(c, p));
    return out;
  }

  friend VectorField operator+(const VectorField& a, const VectorField& b) {
    check_dims(a.dim_, b.dim_);
    std::vector<Expr> out;
    for (int i = 0; i < a.dim_; ++i) out.push_back(add(a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(i)]));
    return VectorField(std::move(out), a.dim_);
  }
  friend VectorField operator-(const VectorField& a, const VectorField& b) {
    check_dims(a.dim_, b.dim_);
    std::vector<Expr> out;
    for (int i = 0; i < a.dim_; ++i) out.push_back(sub(a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(i)]));
    return VectorField(std::move(out), a.dim_);
  }
  friend VectorField operator*(const Expr& s, const VectorField& a) {
    std::vector<Expr> out;
    for (const auto& c : a.components_) out.push_back(mul(s, c));
    return VectorField(std::move(out), a.dim_);
  }

  static void check_dims(int a, int b) {
    if (a != b) throw DimensionError("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  }

 private:
  std::vector<Expr> components_;
  int dim_;
};

/// (DV)X = sum_i X_i dV/dx_i.
inline ScalarField directional_derivative(const VectorField& X, const ScalarField& V) {
  VectorField::check_dims(X.dim(), V.dim());
  Expr acc;
  for (int i = 1; i <= X.dim(); ++i) {
    const Expr& xi = X[static_cast<std::size_t>(i - 1)];
    if (xi.is_zero() || !V.body().depends_on(i)) continue;
    acc = add(acc, mul(xi, differentiate(V.body(), i)));
  }
  return ScalarField(simplify(acc), X.dim());
}

/// [X,Y] = (DY)X - (DX)Y, componentwise.
inline VectorField lie_bracket(const VectorField& X, const VectorField& Y) {
  VectorField::check_dims(X.dim(), Y.dim());
  const int n = X.dim();
  std::vector<Expr> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Expr& xi = X[static_cast<std::size_t>(i)];
    const Expr& yi = Y[static_cast<std::size_t>(i)];
    Expr acc;
    for (int j = 1; j <= n; ++j) {
      const Expr& xj = X[static_cast<std::size_t>(j - 1)];
      const Expr& yj = Y[static_cast<std::size_t>(j - 1)];
      if (!xj.is_zero() && yi.depends_on(j)) acc = add(acc, mul(differentiate(yi, j), xj));
      if (!yj.is_zero() && xi.depends_on(j)) acc = sub(acc, mul(differentiate(xi, j), yj));
    }
    out.push_back(simplify(acc));
  }
  return VectorField(std::move(out), n);
}

/// [...[[Y,X],X],...,X] with k brackets.
inline VectorField iterated_adjoint(const VectorField& Y, const VectorField& X, int k) {
  if (k < 1) throw PreconditionError("iterated_adjoint requires k >= 1");
  VectorField acc = Y;
  for (int i = 0; i < k; ++i) acc = lie_bracket(acc, X);
  return acc;
}

/// f^i V := f(f^{i-1} V) with f^1 V = fV.
inline ScalarField power_derivative(const VectorField& f, const ScalarField& V, int i) {
  if (i < 1) throw PreconditionError("power_derivative requires i >= 1");
  ScalarField acc = V;
  for (int k = 0; k < i; ++k) acc = directional_derivative(f, acc);
  return acc;
}

/// A Lie monomial in the generators f and g, stored as a binary tree.
class LieWord {
 public:
  static LieWord f() { return LieWord('f'); }
  static LieWord g() { return LieWord('g'); }
  static LieWord bracket(const LieWord& a, const LieWord& b) {
    LieWord w;
    w.node_ = std::make_shared<Node>(Node{'\0', a.node_, b.node_, a.order() + b.order(),
                                          "[" + a.to_string() + "," + b.to_string() + "]"});
    return w;
  }

  /// Leaf count; an upper bound on the span-layer order of the monomial.
  int order() const { return node_->order; }
  bool is_leaf() const { return node_->leaf != '\0'; }
  char leaf() const { return node_->leaf; }
  LieWord left() const { return LieWord(node_->left); }
  LieWord right() const { return LieWord(node_->right); }
  const std::string& to_string() const { return node_->text; }

  friend bool operator==(const LieWord& a, const LieWord& b) { return a.to_string() == b.to_string(); }
  friend bool operator<(const LieWord& a, const LieWord& b) { return a.to_string() < b.to_string(); }

 private:
  struct Node {
    char leaf;
    std::shared_ptr<const Node> left, right;
    int order;
    std::string text;
  };

  LieWord() = default;
  explicit LieWord(char leaf) : node_(std::make_shared<Node>(Node{leaf, nullptr, nullptr, 1, std::string(1, leaf)})) {}
  explicit LieWord(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  std::shared_ptr<const Node> node_;
};

using LieProduct = std::vector<LieWord>;

inline std::string to_string(const LieProduct& p) {
  std::string s = "(";
  for (std::size_t i = 0; i < p.size(); ++i) s += (i ? "," : "") + p[i].to_string();
  return s + ")";
}

/// All bracket words with exactly `order` leaves. Words containing a bracket of two identical
/// subwords are omitted since they are identically zero.
inline std::vector<LieWord> enumerate_words(int order) {
  std::vector<LieWord> out;
  if (order < 1) return out;
  if (order == 1) return {LieWord::f(), LieWord::g()};
  for (int left = 1; left < order; ++left) {
    auto ls = enumerate_words(left);
    auto rs = enumerate_words(order - left);
    for (const auto& a : ls)
      for (const auto& b : rs)
        if (!(a == b)) out.push_back(LieWord::bracket(a, b));
  }
  return out;
}

inline constexpr int kDefaultMaxOrder = 4;

/// Ordered tuples (D1,...,Dk), k >= 1, of words other than the single generator g whose orders
/// sum to at most N.
inline std::vector<LieProduct> enumerate_monomial_products(int N, int N_max = kDefaultMaxOrder) {
  if (N < 1) throw PreconditionError("N must be positive");
  if (N > N_max)
    throw PreconditionError("N = " + std::to_string(N) + " exceeds N_max = " + std::to_string(N_max));
  std::vector<std::vector<LieWord>> words(static_cast<std::size_t>(N + 1));
  for (int k = 1; k <= N; ++k) {
    for (auto& w : enumerate_words(k))
      if (!(w == LieWord::g())) words[static_cast<std::size_t>(k)].push_back(w);
  }
  // by_total[s] lists every tuple of total order s.
  std::vector<std::vector<LieProduct>> by_total(static_cast<std::size_t>(N + 1));
  for (int s = 1; s <= N; ++s) {
    for (int first = 1; first <= s; ++first) {
      for (const auto& w : words[static_cast<std::size_t>(first)]) {
        if (first == s) {
          by_total[static_cast<std::size_t>(s)].push_back({w});
          continue;
        }
        for (const auto& rest : by_total[static_cast<std::size_t>(s - first)]) {
          LieProduct p{w};
          p.insert(p.end(), rest.begin(), rest.end());
          by_total[static_cast<std::size_t>(s)].push_back(std::move(p));
        }
      }
    }
  }
  std::vector<LieProduct> out;
  for (int s = 1; s <= N; ++s)
    for (auto& p : by_total[static_cast<std::size_t>(s)]) out.push_back(std::move(p));
  return out;
}

/// Symbolic realization of words and word products for a fixed pair (f, g), with memoization.
/// Not thread-safe; callers serialize access.
class LieCalculus {
 public:
  LieCalculus(VectorField f, VectorField g, ScalarField V)
      : f_(std::move(f)), g_(std::move(g)), V_(std::move(V)) {
    VectorField::check_dims(f_.dim(), g_.dim());
    VectorField::check_dims(f_.dim(), V_.dim());
  }

  const VectorField& f() const { return f_; }
  const VectorField& g() const { return g_; }
  const ScalarField& V() const { return V_; }

  const VectorField& field(const LieWord& w) {
    auto it = fields_.find(w.to_string());
    if (it != fields_.end()) return it->second;
    VectorField value = w.is_leaf() ? (w.leaf() == 'f' ? f_ : g_) : lie_bracket(field(w.left()), field(w.right()));
    return fields_.emplace(w.to_string(), std::move(value)).first->second;
  }

  /// (D1 D2 ... Dk V) = D1(D2(...(Dk V))).
  const ScalarField& product(const LieProduct& p) { return product_from(p, 0); }

  /// f^i V, with f^0 V = V.
  const ScalarField& f_power(int i) {
    LieProduct p(static_cast<std::size_t>(i), LieWord::f());
    return product(p);
  }

 private:
  const ScalarField& product_from(const LieProduct& p, std::size_t start) {
    if (start == p.size()) return V_;
    std::string key;
    for (std::size_t i = start; i < p.size(); ++i) key += p[i].to_string() + ";";
    auto it = scalars_.find(key);
    if (it != scalars_.end()) return it->second;
    const ScalarField& inner = product_from(p, start + 1);
    ScalarField value = directional_derivative(field(p[start]), inner);
    return scalars_.emplace(std::move(key), std::move(value)).first->second;
  }

  VectorField f_, g_;
  ScalarField V_;
  std::map<std::string, VectorField> fields_;
  std::map<std::string, ScalarField> scalars_;
};

}  // namespace sdstab
