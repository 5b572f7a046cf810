#include <catch_amalgamated.hpp>

#include <cmath>

#include "sdstab/closed_loop.hpp"
#include "support.hpp"

using namespace sdstab;

namespace {

const Partition& irregular() {
  static const Partition p = Partition::explicit_times({0.0, 0.1, 0.7, 0.8, 2.0}, 0.5);
  return p;
}

const LoopResult& dbl_run() {
  static const LoopResult r = [] {
    LoopOptions o;
    o.thresholds = {0.1, 0.01};
    return run_closed_loop(test::double_integrator(), {1.0, 0.0}, Partition::uniform(0.5), 50.0, o);
  }();
  return r;
}

const LoopResult& example2_run() {
  static const LoopResult r = run_closed_loop(test::example2(), {1.0, 0.0, 0.0}, Partition::uniform(0.5), 100.0);
  return r;
}

void check_successful_run(const LoopResult& r) {
  CHECK(r.report.succeeded());
  const auto& cps = r.trajectory.checkpoints;
  REQUIRE(cps.size() >= 2);
  for (std::size_t k = 1; k < cps.size(); ++k) CHECK(cps[k].V < cps[k - 1].V);
  CHECK(r.report.overshoot_ratio <= 2.0 + 1e-9);
  for (const auto& f : verify_facts(r.trajectory, r.report)) {
    INFO(f.name << ": " << f.detail);
    CHECK(f.passed);
  }
  double prev = -1.0;
  for (const auto& s : r.trajectory.samples) {
    CHECK(s.t >= prev);
    prev = s.t;
  }
}

}  // namespace

TEST_CASE("partitions generate increasing times", "[loop][partition]") {
  auto u = Partition::uniform(0.5);
  CHECK(u.time(0) == 0.0);
  CHECK(u.time(3) == 1.5);
  const auto& p = irregular();
  std::vector<double> expect{0.0, 0.1, 0.7, 0.8, 2.0, 2.5, 3.0};
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(p.time(i) == Catch::Approx(expect[i]));
  CHECK(Partition::explicit_times({0.0, 1.0, 3.0}).time(3) == 5.0);
  CHECK_THROWS_AS(Partition::uniform(0.0), PreconditionError);
  CHECK_THROWS_AS(Partition::explicit_times({0.1, 0.2}), PreconditionError);
  CHECK_THROWS_AS(Partition::explicit_times({0.0, 0.2, 0.2}), PreconditionError);
  CHECK_THROWS_AS(Partition::explicit_times({0.0}), PreconditionError);
}

TEST_CASE("double integrator closed loop converges", "[loop]") {
  const auto& r = dbl_run();
  check_successful_run(r);
  CHECK(r.report.final_norm <= 0.05);
  CHECK(r.report.final_time <= 50.0);
  REQUIRE(r.report.thresholds.size() == 2);
  CHECK(r.report.thresholds[0].time.has_value());
  CHECK(r.report.thresholds[1].time.has_value());
  CHECK(*r.report.thresholds[0].time < *r.report.thresholds[1].time);
  for (const auto& s : r.trajectory.samples) CHECK(std::fabs(s.V - 0.5 * (s.x[0] * s.x[0] + s.x[1] * s.x[1])) <= 1e-12);
}

TEST_CASE("example 2 closed loop from the P4 start", "[loop]") {
  const auto& r = example2_run();
  check_successful_run(r);
  CHECK(r.report.final_norm <= 0.1);
}

TEST_CASE("irregular partitions also stabilize", "[loop][partition]") {
  auto a = run_closed_loop(test::double_integrator(), {1.0, 0.0}, irregular(), 50.0);
  check_successful_run(a);
  CHECK(a.report.final_norm <= 0.05);
  CHECK(a.report.intervals[1].start == 0.1);
  CHECK(a.report.intervals[1].end == 0.7);
  auto b = run_closed_loop(test::example2(), {1.0, 0.0, 0.0}, irregular(), 100.0);
  check_successful_run(b);
  CHECK(b.report.final_norm <= 0.1);
}

TEST_CASE("interval input depends only on the sampled state", "[loop][sampled]") {
  const auto& r = dbl_run();
  const auto sys = test::double_integrator();
  REQUIRE(r.report.intervals.size() > 5);
  for (std::size_t i = 0; i < r.report.intervals.size(); i += 3) {
    const auto& iv = r.report.intervals[i];
    auto replay = plan_interval(sys, iv.x_start, iv.end - iv.start);
    CHECK(replay.program == iv.plan.program);
    const double len = iv.plan.program.total_duration();
    for (int j = 0; j <= 50; ++j) {
      double s = len * j / 50.0;
      CHECK(replay.program.value_at(s) == iv.plan.program.value_at(s));
    }
  }
  // Plant states at step starts coincide with the model predictions.
  std::size_t c = 0;
  for (const auto& iv : r.report.intervals)
    for (const auto& pred : iv.plan.predicted) {
      while (c < r.trajectory.checkpoints.size() && r.trajectory.checkpoints[c].x != pred.vector()) ++c;
      CHECK(c < r.trajectory.checkpoints.size());
    }
}

TEST_CASE("closed-loop runs are deterministic", "[loop]") {
  LoopOptions o;
  o.thresholds = {0.1, 0.01};
  auto again = run_closed_loop(test::double_integrator(), {1.0, 0.0}, Partition::uniform(0.5), 50.0, o);
  const auto& first = dbl_run();
  REQUIRE(again.trajectory.samples.size() == first.trajectory.samples.size());
  for (std::size_t i = 0; i < again.trajectory.samples.size(); ++i) {
    CHECK(again.trajectory.samples[i].t == first.trajectory.samples[i].t);
    CHECK(again.trajectory.samples[i].x == first.trajectory.samples[i].x);
    CHECK(again.trajectory.samples[i].checkpoint == first.trajectory.samples[i].checkpoint);
  }
  CHECK(again.report.checkpoint_V == first.report.checkpoint_V);
  CHECK(again.report.overshoot_ratio == first.report.overshoot_ratio);
}

TEST_CASE("start inside the stop radius returns immediately", "[loop]") {
  auto r = run_closed_loop(test::double_integrator(), {1e-4, 0.0}, Partition::uniform(0.5), 10.0);
  CHECK(r.report.status == LoopStatus::Converged);
  CHECK(r.report.intervals.empty());
  CHECK(r.trajectory.samples.size() == 1);
  for (const auto& f : verify_facts(r.trajectory, r.report)) CHECK(f.passed);
  CHECK_THROWS_AS(run_closed_loop(test::double_integrator(), {1.0, 0.0}, Partition::uniform(0.5), 0.0),
                  PreconditionError);
}

TEST_CASE("verify_facts detects violations", "[loop][facts]") {
  auto traj = dbl_run().trajectory;
  auto report = dbl_run().report;
  traj.checkpoints[5].V = traj.checkpoints[4].V * 1.01;
  auto facts = verify_facts(traj, report);
  CHECK_FALSE(facts[0].passed);

  auto high = dbl_run().trajectory;
  high.samples[10].V = 10.0;
  CHECK_FALSE(verify_facts(high, report)[1].passed);

  Trajectory origin;
  origin.samples.push_back({0.0, {0.0, 0.0}, 0.0, 0, true});
  origin.samples.push_back({1.0, {0.0, 0.0}, 0.0, 0, false});
  origin.checkpoints.push_back(origin.samples[0]);
  LoopReport empty;
  empty.thresholds = {{0.5, 0.0}};
  for (const auto& f : verify_facts(origin, empty)) CHECK(f.passed);
}

TEST_CASE("failing synthesis ends the run with a partial trajectory", "[loop][errors]") {
  LoopOptions o;
  o.synth.budget = 0;
  auto r = run_closed_loop(test::double_integrator(), {1.0, 0.0}, Partition::uniform(0.5), 10.0, o);
  CHECK(r.report.status == LoopStatus::SynthesisFailed);
  CHECK_FALSE(r.report.succeeded());
  CHECK_FALSE(r.report.message.empty());
  CHECK(r.trajectory.samples.size() >= 1);

  // Not certifiable anywhere on x2 = 0: the drift pushes V up there.
  auto bad = SystemDef::from_strings(2, {"x1", "0"}, {"0", "1"}, "0.5*(x1^2+x2^2)");
  auto q = run_closed_loop(bad, {1.0, 0.0}, Partition::uniform(0.5), 10.0);
  CHECK(q.report.status == LoopStatus::Inconclusive);
}
