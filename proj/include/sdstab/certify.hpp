#pragma once

// Pointwise classification of the bracket conditions that make a state steerable toward lower V:
// transversality, the Artstein-Sontag inequality, or one of four bracket cases P1..P4 with an
// integer N.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <future>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "sdstab/system.hpp"

namespace sdstab {

enum class CertificateCase { Transversal, ArtsteinSontag, P1, P2, P3, P4, Inconclusive };

inline std::string_view to_string(CertificateCase c) {
  switch (c) {
    case CertificateCase::Transversal:
      return "Transversal";
    case CertificateCase::ArtsteinSontag:
      return "ArtsteinSontag";
    case CertificateCase::P1:
      return "P1";
    case CertificateCase::P2:
      return "P2";
    case CertificateCase::P3:
      return "P3";
    case CertificateCase::P4:
      return "P4";
    case CertificateCase::Inconclusive:
      return "Inconclusive";
  }
  return "?";
}

struct Witness {
  std::string name;
  double value;
};

struct CertifyOptions {
  double tau_zero = 1e-9;
  int N_max = kDefaultMaxOrder;
};

struct Certificate {
  CertificateCase kind = CertificateCase::Inconclusive;
  int N = 0;
  std::vector<Witness> witnesses;
  double tau_zero = 1e-9;
  /// tau_zero * (1 + |x|^2): values at or below this magnitude count as zero.
  double zero_threshold = 0.0;
  std::string note;

  std::optional<double> witness(std::string_view name) const {
    for (const auto& w : witnesses)
      if (w.name == name) return w.value;
    return std::nullopt;
  }
  bool conclusive() const { return kind != CertificateCase::Inconclusive; }
};

/// Word [..[[f,g],g],..,g] with N copies of g.
inline LieWord ad_g_word(int N) {
  LieWord w = LieWord::f();
  for (int i = 0; i < N; ++i) w = LieWord::bracket(w, LieWord::g());
  return w;
}

/// Word [..[[g,f],f],..,f] with N copies of f.
inline LieWord ad_f_word(int N) {
  LieWord w = LieWord::g();
  for (int i = 0; i < N; ++i) w = LieWord::bracket(w, LieWord::f());
  return w;
}

inline std::string f_power_name(int i) { return i == 1 ? "fV" : "f^" + std::to_string(i) + "V"; }

/// The symbolic quantities certification evaluates, precomputed up to N_max so that many points
/// can be evaluated concurrently without touching the shared cache.
struct CertifyPlan {
  struct Level {
    std::vector<std::pair<std::string, Expr>> products;  // word products of total order N
    Expr ad_g;                                           // ([..[f,g],..,g] V), N copies of g
    Expr ad_f;                                           // ([..[g,f],..,f] V), N copies of f
    std::string ad_g_name, ad_f_name;
  };

  Expr gV;
  std::vector<Expr> f_powers;  // f_powers[i] = f^i V for i = 0..N_max+1
  std::vector<Level> levels;   // levels[N-1] for N = 1..N_max

  static CertifyPlan build(const SystemDef& sys, int N_max) {
    CertifyPlan plan;
    auto products = enumerate_monomial_products(N_max, N_max);
    sys.with_calculus([&](LieCalculus& lc) {
      plan.gV = directional_derivative(lc.g(), lc.V()).body();
      for (int i = 0; i <= N_max + 1; ++i) plan.f_powers.push_back(lc.f_power(i).body());
      plan.levels.resize(static_cast<std::size_t>(N_max));
      for (const auto& p : products) {
        int total = 0;
        for (const auto& w : p) total += w.order();
        plan.levels[static_cast<std::size_t>(total - 1)].products.emplace_back(to_string(p) + "V",
                                                                               lc.product(p).body());
      }
      for (int N = 1; N <= N_max; ++N) {
        auto& lv = plan.levels[static_cast<std::size_t>(N - 1)];
        LieWord wg = ad_g_word(N), wf = ad_f_word(N);
        lv.ad_g = lc.product({wg}).body();
        lv.ad_f = lc.product({wf}).body();
        lv.ad_g_name = wg.to_string() + "V";
        lv.ad_f_name = wf.to_string() + "V";
      }
    });
    return plan;
  }

  int N_max() const { return static_cast<int>(levels.size()); }
};

namespace detail {

inline Certificate classify(const CertifyPlan& plan, const EvalPoint& x, const CertifyOptions& opt) {
  Certificate c;
  c.tau_zero = opt.tau_zero;
  const double r = x.norm();
  c.zero_threshold = opt.tau_zero * (1.0 + r * r);
  const double thr = c.zero_threshold;
  auto is_zero = [thr](double v) { return std::fabs(v) <= thr; };
  auto is_negative = [thr](double v) { return v < -thr; };
  auto record = [&c](std::string name, double v) {
    c.witnesses.push_back({std::move(name), v});
    return v;
  };

  const double gV = record("gV", evaluate(plan.gV, x));
  const double fV = record("fV", evaluate(plan.f_powers[1], x));
  if (!is_zero(gV)) {
    c.kind = CertificateCase::Transversal;
    return c;
  }
  if (is_negative(fV)) {
    c.kind = CertificateCase::ArtsteinSontag;
    return c;
  }
  for (int N = 1; N <= plan.N_max(); ++N) {
    const auto& lv = plan.levels[static_cast<std::size_t>(N - 1)];
    const double fN = N == 1 ? fV : c.witness(f_power_name(N)).value();
    if (!is_zero(fN)) {
      c.note = f_power_name(N) + " is nonzero, so no N >= " + std::to_string(N) + " qualifies";
      c.N = N - 1;
      return c;
    }
    for (const auto& [name, e] : lv.products) {
      double v = evaluate(e, x);
      if (!is_zero(v)) {
        c.witnesses.push_back({name, v});
        c.note = "word product " + name + " is nonzero, so no N >= " + std::to_string(N) + " qualifies";
        c.N = N - 1;
        return c;
      }
    }
    const double fN1 = record(f_power_name(N + 1), evaluate(plan.f_powers[static_cast<std::size_t>(N + 1)], x));
    c.N = N;
    if (is_negative(fN1)) {
      c.kind = CertificateCase::P1;
      return c;
    }
    const double adg = record(lv.ad_g_name, evaluate(lv.ad_g, x));
    if (N % 2 == 1 && !is_zero(adg)) {
      c.kind = CertificateCase::P2;
      return c;
    }
    if (N % 2 == 0 && is_negative(adg)) {
      c.kind = CertificateCase::P3;
      return c;
    }
    if (is_zero(fN1)) {
      const double adf = record(lv.ad_f_name, evaluate(lv.ad_f, x));
      if (!is_zero(adf)) {
        c.kind = CertificateCase::P4;
        return c;
      }
    }
  }
  c.N = plan.N_max();
  c.note = "N_max = " + std::to_string(plan.N_max()) + " exceeded without a qualifying case";
  return c;
}

inline void check_point(const SystemDef& sys, const EvalPoint& x, const CertifyOptions& opt) {
  if (x.dim() != sys.dim())
    throw DimensionError("point has dimension " + std::to_string(x.dim()) + ", system has " +
                         std::to_string(sys.dim()));
  if (x.norm() <= opt.tau_zero) throw PreconditionError("certification requires x != 0");
  if (opt.N_max < 1) throw PreconditionError("N_max must be positive");
}

}  // namespace detail

/// Classifies the state x (x != 0). The first qualifying case at the smallest N wins, with
/// precedence P1 > P2 > P3 > P4.
inline Certificate certify_point(const SystemDef& sys, const EvalPoint& x, const CertifyOptions& opt = {}) {
  detail::check_point(sys, x, opt);
  auto plan = sys.memo<CertifyPlan>("certify-plan:" + std::to_string(opt.N_max),
                                    [&] { return CertifyPlan::build(sys, opt.N_max); });
  return detail::classify(*plan, x, opt);
}

struct Box {
  std::vector<double> lo, hi;
};

struct GridCertificate {
  EvalPoint point;
  bool skipped_origin = false;
  std::optional<Certificate> certificate;
};

/// Certifies every point of a tensor grid over `box`. Points within tau_zero of the origin are
/// flagged as skipped. Points are evaluated concurrently; output order is row-major with the
/// last axis fastest.
inline std::vector<GridCertificate> certify_grid(const SystemDef& sys, const Box& box,
                                                 const std::vector<int>& resolution, const CertifyOptions& opt = {},
                                                 unsigned threads = 0) {
  const auto n = static_cast<std::size_t>(sys.dim());
  if (box.lo.size() != n || box.hi.size() != n || resolution.size() != n)
    throw DimensionError("box and resolution must have one entry per state dimension");
  std::size_t total = 1;
  for (int k : resolution) {
    if (k < 1) throw PreconditionError("empty grid: every axis needs at least one point");
    total *= static_cast<std::size_t>(k);
  }
  if (opt.N_max < 1) throw PreconditionError("N_max must be positive");

  std::vector<GridCertificate> out(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::vector<double> p(n);
    std::size_t rem = idx;
    for (std::size_t a = n; a-- > 0;) {
      auto k = static_cast<std::size_t>(resolution[a]);
      std::size_t i = rem % k;
      rem /= k;
      p[a] = k == 1 ? 0.5 * (box.lo[a] + box.hi[a])
                    : box.lo[a] + (box.hi[a] - box.lo[a]) * static_cast<double>(i) / static_cast<double>(k - 1);
      if (k == 1 && box.lo[a] == box.hi[a]) p[a] = box.lo[a];
    }
    out[idx].point = EvalPoint(std::move(p));
    out[idx].skipped_origin = out[idx].point.norm() <= opt.tau_zero;
  }

  auto plan_ptr = sys.memo<CertifyPlan>("certify-plan:" + std::to_string(opt.N_max),
                                        [&] { return CertifyPlan::build(sys, opt.N_max); });
  const CertifyPlan& plan = *plan_ptr;
  if (threads == 0) threads = std::max(1U, std::min(8U, std::thread::hardware_concurrency()));
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, total));
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      if (!out[i].skipped_origin) out[i].certificate = detail::classify(plan, out[i].point, opt);
  };
  std::vector<std::future<void>> jobs;
  std::size_t chunk = (total + threads - 1) / threads;
  for (std::size_t begin = 0; begin < total; begin += chunk)
    jobs.push_back(std::async(std::launch::async, work, begin, std::min(total, begin + chunk)));
  for (auto& j : jobs) j.get();
  return out;
}

}  // namespace sdstab
