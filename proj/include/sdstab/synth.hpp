#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sdstab/certify.hpp"
#include "sdstab/integrate.hpp"

namespace sdstab {

/// Fixed-step integration used by the diagnostics: the integration error is then a smooth
/// function of the flow time, so finite differences in t stay clean.
inline IntegratorOptions diagnostic_integrator(int steps = 64) {
  IntegratorOptions o;
  o.fixed_steps = steps;
  return o;
}

/// The two-segment program u2 = -rho*u1 on [0, t], then u1 on (t, t + rho*t].
inline ControlProgram omega_program(double rho, double u1, double t) {
  if (!(rho > 0.0)) throw PreconditionError("rho must be positive");
  return ControlProgram({{-rho * u1 + 0.0, t}, {u1, rho * t}});
}

/// R(t): flow of Y = f + u2 g for time t, then of X = f + u1 g for time rho*t.
inline EvalPoint composed_flow(const SystemDef& sys, const EvalPoint& x0, double rho, double u1, double t,
                               const IntegratorOptions& opt = diagnostic_integrator()) {
  if (!(t >= 0.0)) throw PreconditionError("composed_flow requires t >= 0");
  if (!(rho > 0.0)) throw PreconditionError("rho must be positive");
  if (x0.dim() != sys.dim()) throw DimensionError("state dimension does not match the system");
  if (t == 0.0) return x0;
  return integrate(sys, x0, omega_program(rho, u1, t), opt).final_state();
}

/// m(t) = V(R(t)).
inline double m_of_t(const SystemDef& sys, const EvalPoint& x0, double rho, double u1, double t,
                     const IntegratorOptions& opt = diagnostic_integrator()) {
  return sys.V_at(composed_flow(sys, x0, rho, u1, t, opt).coords());
}

struct MDerivativeOptions {
  /// Base stencil spacing; 0 picks 0.05 / ((1 + rho)(1 + max(1, rho)|u1|)).
  double h = 0.0;
  IntegratorOptions integrator = diagnostic_integrator();
  /// Relative error assumed for each m(t) value when bounding rounding noise.
  double value_noise = 1e-12;
  /// Flag threshold: noise above this fraction of max(1, |estimates|) marks the result ill-conditioned.
  double ill_conditioned_ratio = 1e-3;
};

struct MDerivatives {
  /// values[n-1] estimates m^(n)(0).
  std::vector<double> values;
  std::vector<double> noise;
  bool ill_conditioned = false;

  double operator[](int n) const { return values[static_cast<std::size_t>(n - 1)]; }
  double noise_of(int n) const { return noise[static_cast<std::size_t>(n - 1)]; }
};

namespace detail {

/// Weights w[n][j] with p^(n)(0) = sum_j w[n][j] m(j) for the interpolant on nodes 0..P-1.
inline std::vector<std::vector<double>> forward_stencil(int P) {
  // Solve the transposed Vandermonde system: sum_j w_j j^k = n! [k == n] for k < P.
  std::vector<std::vector<double>> W(static_cast<std::size_t>(P), std::vector<double>(static_cast<std::size_t>(P)));
  for (int n = 0; n < P; ++n) {
    std::vector<std::vector<long double>> A(static_cast<std::size_t>(P), std::vector<long double>(static_cast<std::size_t>(P) + 1));
    long double fact = 1;
    for (int i = 2; i <= n; ++i) fact *= i;
    for (int k = 0; k < P; ++k) {
      for (int j = 0; j < P; ++j) A[k][j] = std::pow(static_cast<long double>(j), k);
      A[k][static_cast<std::size_t>(P)] = k == n ? fact : 0;
    }
    for (int c = 0; c < P; ++c) {
      int piv = c;
      for (int r = c + 1; r < P; ++r)
        if (std::fabs(A[r][c]) > std::fabs(A[piv][c])) piv = r;
      std::swap(A[c], A[piv]);
      for (int r = 0; r < P; ++r) {
        if (r == c) continue;
        long double f = A[r][c] / A[c][c];
        for (int k = c; k <= P; ++k) A[r][k] -= f * A[c][k];
      }
    }
    for (int j = 0; j < P; ++j) W[n][j] = static_cast<double>(A[j][static_cast<std::size_t>(P)] / A[j][j]);
  }
  return W;
}

}  // namespace detail

/// Estimates m^(1)(0) .. m^(order_max)(0) by one-sided polynomial stencils on t_j = j h and
/// t_j = j h / 2, combined by Richardson extrapolation.
inline MDerivatives m_derivative_estimates(const SystemDef& sys, const EvalPoint& x0, double rho, double u1,
                                           int order_max, const MDerivativeOptions& opt = {}) {
  if (order_max < 1 || order_max > 4) throw PreconditionError("order_max must be in 1..4");
  const int P = order_max + 4;
  const double h = opt.h > 0.0 ? opt.h : 0.05 / ((1.0 + rho) * (1.0 + std::max(1.0, rho) * std::fabs(u1)));
  const auto Wp = detail::forward_stencil(P);

  auto estimates = [&](double step, std::vector<double>& abs_weight) {
    std::vector<double> m(static_cast<std::size_t>(P));
    for (int j = 0; j < P; ++j) m[j] = m_of_t(sys, x0, rho, u1, j * step, opt.integrator);
    std::vector<double> out(static_cast<std::size_t>(order_max));
    abs_weight.assign(static_cast<std::size_t>(order_max), 0.0);
    for (int n = 1; n <= order_max; ++n) {
      double acc = 0.0, aw = 0.0;
      for (int j = 0; j < P; ++j) {
        acc += Wp[n][j] * (m[j] - m[0]);
        aw += std::fabs(Wp[n][j]) * std::max(1.0, std::fabs(m[j]));
      }
      out[n - 1] = acc / std::pow(step, n);
      abs_weight[n - 1] = aw / std::pow(step, n);
    }
    return out;
  };
  std::vector<double> aw_coarse, aw_fine;
  auto coarse = estimates(h, aw_coarse);
  auto fine = estimates(h / 2, aw_fine);

  MDerivatives r;
  double scale = 1.0;
  for (int n = 1; n <= order_max; ++n) {
    const double p = P - n;
    const double a = fine[n - 1], b = coarse[n - 1];
    r.values.push_back(a + (a - b) / (std::pow(2.0, p) - 1.0));
    r.noise.push_back(std::fabs(a - b) + opt.value_noise * aw_fine[n - 1]);
    scale = std::max(scale, std::fabs(r.values.back()));
  }
  for (double nz : r.noise) r.ill_conditioned = r.ill_conditioned || nz > opt.ill_conditioned_ratio * scale;
  return r;
}

/// Compares dR/dt with the truncated series sum_{nu <= k} (rho t)^nu / nu! A_nu evaluated at R(t),
/// where A_0 = rho X + Y and A_nu = [...[Y, X], ..., X] (nu brackets).
class CbhProbe {
 public:
  CbhProbe(SystemDef sys, EvalPoint x0, double rho, double u1, int k,
           IntegratorOptions opt = diagnostic_integrator(256), double dt = 1e-3)
      : sys_(std::move(sys)), x0_(std::move(x0)), rho_(rho), u1_(u1), opt_(opt), dt_(dt) {
    if (k < 0 || k > 4) throw PreconditionError("CBH truncation order must be in 0..4");
    if (!(rho > 0.0)) throw PreconditionError("rho must be positive");
    const auto& f = sys_.f();
    const auto& g = sys_.g();
    VectorField X = f + Expr::constant(u1) * g;
    VectorField Y = f + Expr::constant(-rho * u1 + 0.0) * g;
    terms_.push_back(Expr::constant(rho) * X + Y);
    for (int nu = 1; nu <= k; ++nu) terms_.push_back(iterated_adjoint(Y, X, nu));
  }

  /// Euclidean norm of the residual vector at flow time t.
  double operator()(double t) const {
    if (!(t >= 0.0)) throw PreconditionError("CBH residual requires t >= 0");
    auto R = [&](double s) { return composed_flow(sys_, x0_, rho_, u1_, s, opt_); };
    const auto n = static_cast<std::size_t>(sys_.dim());
    std::vector<double> dR(n, 0.0);
    const double h = dt_;
    if (t >= 2 * h) {
      auto a = R(t - 2 * h), b = R(t - h), c = R(t + h), d = R(t + 2 * h);
      for (std::size_t i = 0; i < n; ++i) dR[i] = (a[i] - 8 * b[i] + 8 * c[i] - d[i]) / (12 * h);
    } else {
      EvalPoint p[5];
      for (int j = 0; j < 5; ++j) p[j] = R(t + j * h);
      for (std::size_t i = 0; i < n; ++i)
        dR[i] = (-25 * p[0][i] + 48 * p[1][i] - 36 * p[2][i] + 16 * p[3][i] - 3 * p[4][i]) / (12 * h);
    }
    const EvalPoint Rt = R(t);
    double coef = 1.0, acc = 0.0;
    std::vector<double> series(n, 0.0);
    for (std::size_t nu = 0; nu < terms_.size(); ++nu) {
      if (nu > 0) coef *= rho_ * t / static_cast<double>(nu);
      auto v = terms_[nu](Rt);
      for (std::size_t i = 0; i < n; ++i) series[i] += coef * v[i];
    }
    for (std::size_t i = 0; i < n; ++i) acc += (dR[i] - series[i]) * (dR[i] - series[i]);
    return std::sqrt(acc);
  }

 private:
  SystemDef sys_;
  EvalPoint x0_;
  double rho_, u1_;
  IntegratorOptions opt_;
  double dt_;
  std::vector<VectorField> terms_;
};

inline double cbh_residual(const SystemDef& sys, const EvalPoint& x0, double rho, double u1, int k, double t) {
  return CbhProbe(sys, x0, rho, u1, k)(t);
}

struct SynthOptions {
  CertifyOptions certify{};
  /// Overshoot allowance a(s) = a_factor * s.
  double a_factor = 2.0;
  double rtol = 1e-10;
  std::size_t budget = 10'000;
  /// Transversal c and the P2/P3 |u1| range over 2^0 .. 2^large_exponent.
  int large_exponent = 10;
  /// P4 |u1| ranges over 2^0 .. 2^-small_exponent.
  int small_exponent = 10;
  /// P4 rho ranges over 2^-rho_exponent .. 2^rho_exponent.
  int rho_exponent = 5;
  /// Durations are halved down to this fraction of the cap.
  double min_duration_factor = 1e-6;
  /// A step must lower V by at least this fraction of V(x0).
  double min_relative_drop = 1e-8;
  bool derivative_filter = true;
  /// When the case-specific search fails, try every omega program on the combined grids.
  bool general_fallback = true;
};

struct StepResult {
  ControlProgram program;
  Certificate certificate;
  /// For two-segment programs; single-segment programs report rho = 0 and u1 = the input.
  double rho = 0.0;
  double u1 = 0.0;
  double drop = 0.0;
  double sup_ratio = 0.0;
  std::size_t simulations = 0;
  bool used_fallback = false;
};

struct CertificateInconclusive : Error {
  explicit CertificateInconclusive(Certificate c)
      : Error("certificate inconclusive: " + c.note), certificate(std::move(c)) {}
  Certificate certificate;
};

struct SynthesisFailed : Error {
  SynthesisFailed(Certificate c, double best_drop, std::size_t simulations)
      : Error("synthesis failed for case " + std::string(to_string(c.kind)) + " after " +
              std::to_string(simulations) + " simulations, best V-drop " + std::to_string(best_drop)),
        certificate(std::move(c)),
        best_drop(best_drop),
        simulations(simulations) {}
  Certificate certificate;
  double best_drop;
  std::size_t simulations;
};

namespace detail {

class StepSearch {
 public:
  StepSearch(const SystemDef& sys, const EvalPoint& x0, double xi, const SynthOptions& opt)
      : sys_(sys), x0_(x0), xi_(xi), opt_(opt), V0_(sys.V_at(x0.coords())) {
    integ_.rtol = opt.rtol;
    integ_.atol = opt.rtol * 1e-2 * std::max(x0.norm(), 1e-300);
  }

  double V0() const { return V0_; }
  std::size_t simulations() const { return sims_; }
  double best_drop() const { return best_drop_; }
  bool exhausted() const { return sims_ >= opt_.budget; }

  /// Runs one candidate; on success fills `out` and returns true.
  bool attempt(const ControlProgram& p, double rho, double u1, StepResult& out) {
    if (exhausted()) return false;
    ++sims_;
    Trajectory tr;
    try {
      tr = integrate(sys_, x0_, p, integ_);
    } catch (const IntegrationError&) {
      return false;
    } catch (const DomainError&) {
      return false;
    }
    const double drop = V0_ - tr.back().V;
    best_drop_ = std::max(best_drop_, drop);
    if (!(drop > opt_.min_relative_drop * V0_) || !(tr.max_V <= opt_.a_factor * V0_)) return false;
    out.program = p;
    out.rho = rho;
    out.u1 = u1;
    out.drop = drop;
    out.sup_ratio = tr.max_V / V0_;
    return true;
  }

  bool constant_input(double u, StepResult& out) {
    for (double eps = xi_; eps >= opt_.min_duration_factor * xi_ && !exhausted(); eps /= 2)
      if (attempt(ControlProgram({{u, eps}}), 0.0, u, out)) return true;
    return false;
  }

  bool omega(double rho, double u1, StepResult& out) {
    for (double t = xi_ / (1.0 + rho); (1.0 + rho) * t >= opt_.min_duration_factor * xi_ && !exhausted(); t /= 2)
      if (attempt(omega_program(rho, u1, t), rho, u1, out)) return true;
    return false;
  }

  /// Negative estimate of m^(order)(0) beyond its noise; true when no estimate is possible.
  bool promising(double rho, double u1, int order) const {
    if (!opt_.derivative_filter || order > 4) return true;
    try {
      auto d = m_derivative_estimates(sys_, x0_, rho, u1, order);
      return d[order] < -d.noise_of(order);
    } catch (const IntegrationError&) {
      return false;
    } catch (const DomainError&) {
      return false;
    }
  }

 private:
  const SystemDef& sys_;
  const EvalPoint& x0_;
  double xi_;
  const SynthOptions& opt_;
  double V0_;
  IntegratorOptions integ_;
  std::size_t sims_ = 0;
  double best_drop_ = -std::numeric_limits<double>::infinity();
};

inline std::vector<double> geometric(int lo_exp, int hi_exp, bool descending) {
  std::vector<double> v;
  for (int e = lo_exp; e <= hi_exp; ++e) v.push_back(std::ldexp(1.0, e));
  if (descending) std::reverse(v.begin(), v.end());
  return v;
}

/// 1, 2, 1/2, 4, 1/4, ...
inline std::vector<double> rho_grid(int exp) {
  std::vector<double> v{1.0};
  for (int e = 1; e <= exp; ++e) {
    v.push_back(std::ldexp(1.0, e));
    v.push_back(std::ldexp(1.0, -e));
  }
  return v;
}

}  // namespace detail

/// Finds a program of total duration <= xi that lowers V from x0 while keeping V <= a_factor V(x0).
inline StepResult synthesize_step(const SystemDef& sys, const EvalPoint& x0, double xi, const SynthOptions& opt = {}) {
  if (!(xi > 0.0)) throw PreconditionError("maximal step duration must be positive");
  Certificate cert = certify_point(sys, x0, opt.certify);
  if (!cert.conclusive()) throw CertificateInconclusive(cert);

  detail::StepSearch search(sys, x0, xi, opt);
  StepResult out;
  out.certificate = cert;
  auto done = [&](bool fallback) {
    out.simulations = search.simulations();
    out.used_fallback = fallback;
    return out;
  };
  const int N = cert.N;
  const auto large = detail::geometric(0, opt.large_exponent, false);

  // Runs the omega search over (rho, u1) pairs, first keeping only those whose estimated
  // m^(N+1)(0) is negative, then all of them if none was promising.
  auto omega_search = [&](const std::vector<std::pair<double, double>>& cands, int order) {
    std::vector<std::pair<double, double>> skipped;
    for (auto [rho, u1] : cands) {
      if (search.exhausted()) return false;
      if (!search.promising(rho, u1, order)) {
        skipped.emplace_back(rho, u1);
        continue;
      }
      if (search.omega(rho, u1, out)) return true;
    }
    if (skipped.size() == cands.size())
      for (auto [rho, u1] : skipped)
        if (search.omega(rho, u1, out)) return true;
    return false;
  };

  bool ok = false;
  switch (cert.kind) {
    case CertificateCase::Transversal: {
      const double sign = *cert.witness("gV") > 0 ? 1.0 : -1.0;
      for (double c : large)
        if ((ok = search.constant_input(-sign * c, out))) break;
      break;
    }
    case CertificateCase::ArtsteinSontag:
      ok = search.constant_input(0.0, out);
      break;
    case CertificateCase::P1:
      ok = search.omega(1.0, 0.0, out);
      break;
    case CertificateCase::P2: {
      std::vector<std::pair<double, double>> cands;
      for (double m : large) cands.insert(cands.end(), {{1.0, m}, {1.0, -m}});
      ok = omega_search(cands, N + 1);
      break;
    }
    case CertificateCase::P3: {
      std::vector<std::pair<double, double>> cands;
      for (double m : large) cands.emplace_back(1.0, m);
      ok = omega_search(cands, N + 1);
      break;
    }
    case CertificateCase::P4: {
      std::vector<std::pair<double, double>> cands;
      for (double rho : detail::rho_grid(opt.rho_exponent))
        for (double m : detail::geometric(-opt.small_exponent, 0, true)) cands.insert(cands.end(), {{rho, m}, {rho, -m}});
      ok = omega_search(cands, N + 1);
      break;
    }
    case CertificateCase::Inconclusive:
      break;
  }
  if (ok) return done(false);

  if (opt.general_fallback) {
    const auto small = detail::geometric(-opt.small_exponent, -1, true);
    std::vector<double> mags(large.begin(), large.end());
    mags.insert(mags.end(), small.begin(), small.end());
    for (double rho : detail::rho_grid(opt.rho_exponent))
      for (double m : mags)
        for (double u1 : {m, -m})
          if (search.omega(rho, u1, out)) return done(true);
  }
  throw SynthesisFailed(cert, search.best_drop(), search.simulations());
}

}  // namespace sdstab
