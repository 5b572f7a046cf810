#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "sdstab/lie.hpp"

namespace sdstab {

/// A control-affine system xdot = f(x) + u g(x) together with a candidate function V.
/// Copies share compiled right-hand sides and the symbolic bracket cache.
class SystemDef {
 public:
  SystemDef(VectorField f, VectorField g, ScalarField V) : shared_(std::make_shared<Shared>(f, g, V)) {}

  /// Parses each component with dimension `dim`.
  static SystemDef from_strings(int dim, const std::vector<std::string>& f, const std::vector<std::string>& g,
                                const std::string& V) {
    auto parse_all = [dim](const std::vector<std::string>& in) {
      std::vector<Expr> out;
      for (const auto& s : in) out.push_back(simplify(parse(s, dim)));
      return out;
    };
    return SystemDef(VectorField(parse_all(f), dim), VectorField(parse_all(g), dim),
                     ScalarField(simplify(parse(V, dim)), dim));
  }

  int dim() const { return shared_->f.dim(); }
  const VectorField& f() const { return shared_->f; }
  const VectorField& g() const { return shared_->g; }
  const ScalarField& V() const { return shared_->V; }

  double V_at(std::span<const double> x) const { return shared_->V_code(x); }

  /// out = f(x) + u g(x).
  void rhs(std::span<const double> x, double u, std::span<double> out) const {
    const auto& s = *shared_;
    for (std::size_t i = 0; i < s.f_code.size(); ++i) {
      double gi = s.g_is_zero[i] ? 0.0 : s.g_code[i](x);
      out[i] = s.f_code[i](x) + u * gi;
    }
  }

  /// Returns the object stored under `key`, building it with `build()` on first use.
  template <typename T, typename Fn>
  std::shared_ptr<const T> memo(const std::string& key, Fn&& build) const {
    std::lock_guard<std::mutex> lock(shared_->memo_mutex);
    auto it = shared_->memo.find(key);
    if (it != shared_->memo.end()) return std::static_pointer_cast<const T>(it->second);
    auto value = std::make_shared<const T>(build());
    shared_->memo.emplace(key, value);
    return value;
  }

  /// Runs `fn(LieCalculus&)` under the shared cache lock.
  template <typename Fn>
  decltype(auto) with_calculus(Fn&& fn) const {
    std::lock_guard<std::mutex> lock(shared_->mutex);
    return fn(shared_->calculus);
  }

 private:
  struct Shared {
    Shared(const VectorField& f_, const VectorField& g_, const ScalarField& V_)
        : f(f_), g(g_), V(V_), calculus(f_, g_, V_), V_code(V_.body()) {
      for (const auto& c : f.components()) f_code.emplace_back(c);
      for (const auto& c : g.components()) {
        g_code.emplace_back(c);
        g_is_zero.push_back(c.is_zero());
      }
    }
    VectorField f, g;
    ScalarField V;
    LieCalculus calculus;
    std::mutex mutex;
    std::mutex memo_mutex;
    std::map<std::string, std::shared_ptr<const void>> memo;
    CompiledExpr V_code;
    std::vector<CompiledExpr> f_code, g_code;
    std::vector<bool> g_is_zero;
  };

  std::shared_ptr<Shared> shared_;
};

}  // namespace sdstab
