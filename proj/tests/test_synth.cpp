#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "sdstab/synth.hpp"
#include "support.hpp"

using namespace sdstab;
using Catch::Approx;

namespace {

struct Named {
  const char* name;
  SystemDef sys;
  EvalPoint x;
};

std::vector<Named> certified_points() {
  return {{"double integrator (1,0)", test::double_integrator(), {1.0, 0.0}},
          {"double integrator (0,1)", test::double_integrator(), {0.0, 1.0}},
          {"example 1 (1,0)", test::example1(), {1.0, 0.0}},
          {"example 2 (1,1,0)", test::example2(), {1.0, 1.0, 0.0}},
          {"example 2 (1,0,0)", test::example2(), {1.0, 0.0, 0.0}}};
}

double slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) mx += std::log(xs[i]), my += std::log(ys[i]);
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());
  double num = 0, den = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    num += (std::log(xs[i]) - mx) * (std::log(ys[i]) - my);
    den += (std::log(xs[i]) - mx) * (std::log(xs[i]) - mx);
  }
  return num / den;
}

/// Re-simulates at 100x tighter tolerance and checks the claimed decrease and overshoot.
void check_sound(const SystemDef& sys, const EvalPoint& x0, const StepResult& r) {
  IntegratorOptions tight;
  tight.rtol = 1e-12;
  tight.atol = 1e-14 * x0.norm();
  auto tr = integrate(sys, x0, r.program, tight);
  const double V0 = sys.V_at(x0.coords());
  CHECK(tr.back().V < V0 - 0.5 * r.drop);
  CHECK(tr.max_V <= 2.0 * V0);
  CHECK(r.drop > 0.0);
  CHECK(r.sup_ratio <= 2.0);
  if (r.program.size() == 2) {
    const auto& s = r.program.segments();
    CHECK(s[0].value == -r.rho * s[1].value);
    CHECK(s[1].duration == r.rho * s[0].duration);
  } else {
    CHECK(r.program.size() == 1);
  }
}

}  // namespace

TEST_CASE("composed flow on the double integrator", "[synth][flow]") {
  auto sys = test::double_integrator();
  CHECK(composed_flow(sys, {1.0, 0.0}, 1.0, 1.0, 0.0) == EvalPoint{1.0, 0.0});
  // f vanishes at (1,0), so with u1 = 0 the state never moves.
  auto still = composed_flow(sys, {1.0, 0.0}, 1.0, 0.0, 0.3);
  CHECK(still == EvalPoint{1.0, 0.0});
  // u2 = -1 for t then u1 = 1 for t: x2 returns to 0 and x1 = 1 - t^2.
  auto r = composed_flow(sys, {1.0, 0.0}, 1.0, 1.0, 0.1);
  CHECK(std::fabs(r[0] - 0.99) <= 1e-8);
  CHECK(std::fabs(r[1]) <= 1e-8);
  // rho = 2, u1 = 1/2: u2 = -1 for t, then 1/2 for 2t gives x1 = 1 - 1.5 t^2, x2 = 0.
  auto q = composed_flow(sys, {1.0, 0.0}, 2.0, 0.5, 0.2);
  CHECK(std::fabs(q[0] - (1.0 - 1.5 * 0.04)) <= 1e-8);
  CHECK(std::fabs(q[1]) <= 1e-8);
  CHECK_THROWS_AS(composed_flow(sys, {1.0, 0.0}, 1.0, 1.0, -0.1), PreconditionError);
  CHECK_THROWS_AS(composed_flow(sys, {1.0, 0.0}, 0.0, 1.0, 0.1), PreconditionError);
}

TEST_CASE("m(t) near zero on the example 2 instance", "[synth][m]") {
  auto sys = test::example2();
  const EvalPoint x0{1.0, 1.0, 0.0};
  CHECK(m_of_t(sys, x0, 1.0, 1.0, 0.0) == 1.0);
  // m(t) - m(0) = -t^2 + O(t^3).
  for (double t : {1e-2, 2e-2, 4e-2}) {
    double rem = m_of_t(sys, x0, 1.0, 1.0, t) - 1.0 + t * t;
    CHECK(std::fabs(rem) <= 10.0 * t * t * t);
  }
  auto dbl = test::double_integrator();
  for (double t : {0.1, 0.5, 1.0}) CHECK(m_of_t(dbl, {1.0, 0.0}, 1.0, 0.0, t) == 0.5);
}

TEST_CASE("m derivative estimates match the hand values", "[synth][m]") {
  auto e2 = m_derivative_estimates(test::example2(), {1.0, 1.0, 0.0}, 1.0, 1.0, 2);
  CHECK(std::fabs(e2[1]) <= 1e-4);
  CHECK(std::fabs(e2[2] + 2.0) <= 5e-3);
  CHECK_FALSE(e2.ill_conditioned);

  auto dbl = m_derivative_estimates(test::double_integrator(), {1.0, 0.0}, 1.0, 1.0, 2);
  CHECK(std::fabs(dbl[1]) <= 1e-4);
  CHECK(std::fabs(dbl[2] + 2.0) <= 5e-3);

  auto still = m_derivative_estimates(test::double_integrator(), {1.0, 0.0}, 1.0, 0.0, 4);
  for (int n = 1; n <= 4; ++n) CHECK(still[n] == 0.0);

  CHECK_THROWS_AS(m_derivative_estimates(test::double_integrator(), {1.0, 0.0}, 1.0, 1.0, 5), PreconditionError);
}

TEST_CASE("forward stencils reproduce polynomial derivatives", "[synth][m]") {
  auto W = detail::forward_stencil(6);
  // p(t) = 1 + 2t - t^3 + 0.5 t^5: p'(0) = 2, p''(0) = 0, p'''(0) = -6.
  std::vector<double> p(6);
  for (int j = 0; j < 6; ++j) p[j] = 1 + 2.0 * j - std::pow(j, 3) + 0.5 * std::pow(j, 5);
  auto apply = [&](int n) {
    double s = 0;
    for (int j = 0; j < 6; ++j) s += W[n][j] * p[j];
    return s;
  };
  CHECK(apply(0) == Approx(1.0).margin(1e-9));
  CHECK(apply(1) == Approx(2.0).margin(1e-9));
  CHECK(apply(2) == Approx(0.0).margin(1e-8));
  CHECK(apply(3) == Approx(-6.0).margin(1e-8));
  CHECK(apply(5) == Approx(60.0).margin(1e-6));
}

TEST_CASE("CBH residual orders", "[synth][cbh]") {
  auto dbl = test::double_integrator();
  CHECK(cbh_residual(dbl, {1.0, 0.0}, 1.0, 1.0, 2, 1e-2) <= 1e-6);
  CHECK(cbh_residual(dbl, {1.0, 0.0}, 1.0, 1.0, 2, 0.0) <= 1e-8);
  CHECK(cbh_residual(test::example2(), {1.0, 1.0, 0.0}, 1.0, 1.0, 1, 0.0) <= 1e-8);

  const std::vector<double> ts{1e-2, 2e-2, 5e-2, 1e-1};
  for (int k = 1; k <= 3; ++k) {
    CbhProbe probe(test::example2(), {1.0, 1.0, 0.0}, 1.0, 1.0, k);
    std::vector<double> rs;
    for (double t : ts) rs.push_back(probe(t));
    INFO("k = " << k);
    CHECK(slope(ts, rs) >= k);
  }
}

TEST_CASE("synthesis succeeds at the certified points", "[synth][step]") {
  for (const auto& [name, sys, x0] : certified_points()) {
    INFO(name);
    auto r = synthesize_step(sys, x0, 0.5);
    CHECK(r.program.total_duration() <= 0.5 * (1 + 1e-12));
    check_sound(sys, x0, r);
  }
  auto t = synthesize_step(test::double_integrator(), {0.0, 1.0}, 0.5);
  REQUIRE(t.program.size() == 1);
  CHECK(t.program.segments()[0].value == -1.0);
  auto w = synthesize_step(test::double_integrator(), {1.0, 0.0}, 0.5);
  REQUIRE(w.program.size() == 2);
  CHECK(w.program.segments()[0].value == -w.program.segments()[1].value);
}

TEST_CASE("derivatives vanish below N + 1 for the chosen omega", "[synth][m]") {
  for (const auto& [name, sys, x0] : certified_points()) {
    auto r = synthesize_step(sys, x0, 0.5);
    if (r.program.size() != 2) continue;
    INFO(name);
    const int N = r.certificate.N;
    auto d = m_derivative_estimates(sys, x0, r.rho, r.u1, N + 1);
    for (int n = 1; n <= N; ++n) CHECK(std::fabs(d[n]) <= d.noise_of(n));
    CHECK(d[N + 1] < -d.noise_of(N + 1));
  }
}

TEST_CASE("synthesis errors", "[synth][errors]") {
  auto dbl = test::double_integrator();
  CHECK_THROWS_AS(synthesize_step(dbl, {0.0, 0.0}, 0.5), PreconditionError);
  CHECK_THROWS_AS(synthesize_step(dbl, {1.0, 0.0}, 0.0), PreconditionError);
  auto bad = SystemDef::from_strings(2, {"x1", "0"}, {"0", "1"}, "0.5*(x1^2+x2^2)");
  CHECK_THROWS_AS(synthesize_step(bad, {1.0, 0.0}, 0.5), CertificateInconclusive);
  SynthOptions none;
  none.budget = 0;
  try {
    synthesize_step(dbl, {1.0, 0.0}, 0.5, none);
    FAIL("expected SynthesisFailed");
  } catch (const SynthesisFailed& e) {
    CHECK(e.simulations == 0);
    CHECK(e.certificate.kind == CertificateCase::P2);
  }
}

TEST_CASE("synthesized steps are sound at random states", "[synth][property]") {
  std::mt19937_64 rng(41);
  for (const auto& sys : {test::double_integrator(), test::example1(), test::example2()}) {
    const int dim = sys.dim();
    for (int k = 0; k < 25; ++k) {
      auto x0 = test::random_point(rng, dim, -1.5, 1.5);
      if (k % 2 == 0) x0[static_cast<std::size_t>(dim - 1)] = 0.0;
      if (x0.norm() < 1e-3) continue;
      auto cert = certify_point(sys, x0);
      if (!cert.conclusive()) continue;
      INFO("state " << x0[0] << ", " << x0[1]);
      auto r = synthesize_step(sys, x0, 0.5);
      check_sound(sys, x0, r);
    }
  }
}
