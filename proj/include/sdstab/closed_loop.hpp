#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sdstab/synth.hpp"

namespace sdstab {

/// Sampling times T_1 = 0 < T_2 < ... generated on demand.
class Partition {
 public:
  static Partition uniform(double step) {
    if (!(step > 0.0) || !std::isfinite(step)) throw PreconditionError("partition step must be positive");
    Partition p;
    p.tail_step_ = step;
    p.times_ = {0.0};
    return p;
  }

  /// Explicit leading times (starting at 0), continued with `tail_step` or the last gap.
  static Partition explicit_times(std::vector<double> times, std::optional<double> tail_step = {}) {
    if (times.empty() || times.front() != 0.0) throw PreconditionError("explicit partition must start at 0");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1])) throw PreconditionError("partition times must be strictly increasing");
    double tail = tail_step.value_or(times.size() > 1 ? times.back() - times[times.size() - 2] : 0.0);
    if (!(tail > 0.0) || !std::isfinite(tail))
      throw PreconditionError("explicit partition needs a positive tail step");
    Partition p;
    p.times_ = std::move(times);
    p.tail_step_ = tail;
    p.explicit_ = true;
    return p;
  }

  /// T_{i+1}, zero-based.
  double time(std::size_t i) const {
    if (i < times_.size()) return times_[i];
    return times_.back() + static_cast<double>(i - times_.size() + 1) * tail_step_;
  }

  bool is_explicit() const { return explicit_; }
  const std::vector<double>& leading_times() const { return times_; }
  double tail_step() const { return tail_step_; }

 private:
  Partition() = default;
  std::vector<double> times_;
  double tail_step_ = 0.0;
  bool explicit_ = false;
};

struct LoopOptions {
  SynthOptions synth{};
  /// Plant and model integration; sample spacing is set per interval.
  double rtol = 1e-10;
  double stop_radius = 1e-3;
  /// Upper bound on a single synthesized step; each step is also capped by the time left in the interval.
  double xi_cap = std::numeric_limits<double>::infinity();
  /// Samples per sampling interval in the recorded trajectory.
  int samples_per_interval = 100;
  /// Leftovers shorter than this fraction of the interval are held with u = 0.
  double sliver_fraction = 1e-9;
  std::size_t max_steps_per_interval = 20'000;
  /// Levels mu for which attainment times are reported.
  std::vector<double> thresholds;
};

enum class LoopStatus { Converged, HorizonReached, SynthesisFailed, Inconclusive, IntegrationFailed };

inline std::string_view to_string(LoopStatus s) {
  switch (s) {
    case LoopStatus::Converged:
      return "converged";
    case LoopStatus::HorizonReached:
      return "horizon-reached";
    case LoopStatus::SynthesisFailed:
      return "synthesis-failed";
    case LoopStatus::Inconclusive:
      return "inconclusive";
    case LoopStatus::IntegrationFailed:
      return "integration-failed";
  }
  return "?";
}

/// The open-loop input applied on one sampling interval, computed from the state sampled at its start.
struct IntervalPlan {
  ControlProgram program;
  /// Local start time of every synthesized step; the held sliver, if any, is not a step.
  std::vector<double> step_offsets;
  std::vector<EvalPoint> predicted;
  std::vector<StepResult> steps;
  LoopStatus status = LoopStatus::HorizonReached;
  std::string message;
  /// The model reached the stop radius before the interval ended.
  bool reached_target = false;
  double held = 0.0;
};

namespace detail {

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline IntegratorOptions plant_options(const LoopOptions& opt, const EvalPoint& x) {
  IntegratorOptions o;
  o.rtol = opt.rtol;
  o.atol = opt.rtol * 1e-2 * std::max(x.norm(), opt.stop_radius);
  return o;
}

}  // namespace detail

/// Chains synthesize_step on model-predicted states from x(T_i) until the interval of length
/// `length` is filled. Depends only on x(T_i) and the options.
inline IntervalPlan plan_interval(const SystemDef& sys, const EvalPoint& x_sampled, double length,
                                  const LoopOptions& opt = {}) {
  IntervalPlan plan;
  EvalPoint x = x_sampled;
  double s = 0.0;
  const double sliver = opt.sliver_fraction * length;
  while (length - s > sliver) {
    if (x.norm() <= opt.stop_radius) {
      plan.reached_target = true;
      return plan;
    }
    if (plan.steps.size() >= opt.max_steps_per_interval) {
      plan.status = LoopStatus::SynthesisFailed;
      plan.message = "step limit per interval exceeded";
      return plan;
    }
    const double xi = std::min(opt.xi_cap, length - s);
    StepResult step;
    try {
      step = synthesize_step(sys, x, xi, opt.synth);
    } catch (const CertificateInconclusive& e) {
      plan.status = LoopStatus::Inconclusive;
      plan.message = e.what();
      return plan;
    } catch (const SynthesisFailed& e) {
      plan.status = LoopStatus::SynthesisFailed;
      plan.message = e.what();
      return plan;
    }
    plan.step_offsets.push_back(s);
    plan.predicted.push_back(x);
    try {
      x = integrate(sys, x, step.program, detail::plant_options(opt, x)).final_state();
    } catch (const Error& e) {
      plan.status = LoopStatus::IntegrationFailed;
      plan.message = e.what();
      return plan;
    }
    plan.program.append(step.program);
    s += step.program.total_duration();
    plan.steps.push_back(std::move(step));
  }
  if (length - s > 0.0) {
    plan.held = length - s;
    plan.program.append(Segment{0.0, length - s});
  }
  if (x.norm() <= opt.stop_radius) plan.reached_target = true;
  return plan;
}

struct IntervalOutcome {
  double start = 0.0, end = 0.0;
  EvalPoint x_start;
  IntervalPlan plan;
};

struct ThresholdTime {
  double mu = 0.0;
  /// First time after which every recorded V stays <= mu.
  std::optional<double> time;
};

struct LoopReport {
  EvalPoint final_state;
  double final_norm = 0.0;
  double final_time = 0.0;
  std::vector<double> checkpoint_V;
  double overshoot_ratio = 0.0;
  std::vector<ThresholdTime> thresholds;
  std::vector<IntervalOutcome> intervals;
  LoopStatus status = LoopStatus::HorizonReached;
  std::string message;

  bool succeeded() const { return status == LoopStatus::Converged || status == LoopStatus::HorizonReached; }
};

struct LoopResult {
  Trajectory trajectory;
  LoopReport report;
};

namespace detail {

inline void fill_thresholds(const Trajectory& traj, LoopReport& report, const std::vector<double>& mus) {
  for (double mu : mus) {
    ThresholdTime tt{mu, {}};
    if (!traj.samples.empty() && traj.samples.back().V <= mu) {
      std::size_t i = traj.samples.size();
      while (i > 0 && traj.samples[i - 1].V <= mu) --i;
      tt.time = traj.samples[i].t;
    }
    report.thresholds.push_back(tt);
  }
}

}  // namespace detail

/// Sampled-data closed loop: on each [T_i, T_{i+1}) the input is plan_interval(x(T_i)).
inline LoopResult run_closed_loop(const SystemDef& sys, const EvalPoint& x0, const Partition& partition,
                                  double horizon, const LoopOptions& opt = {}) {
  if (!(horizon > 0.0)) throw PreconditionError("horizon must be positive");
  if (x0.dim() != sys.dim()) throw DimensionError("initial state dimension does not match the system");

  LoopResult out;
  auto& traj = out.trajectory;
  auto& report = out.report;
  EvalPoint x = x0;
  double t = 0.0;
  int segment_index = 0;
  double overshoot = 0.0;

  auto checkpoint = [&](double time, const EvalPoint& state) {
    Sample s{time, state.vector(), sys.V_at(state.coords()), segment_index, true};
    if (!traj.samples.empty() && traj.samples.back().t == time) {
      traj.samples.back().checkpoint = true;
    } else {
      traj.samples.push_back(s);
    }
    traj.checkpoints.push_back(s);
    report.checkpoint_V.push_back(s.V);
  };
  // Integrates `program` from the current state, appending samples; returns max V along it.
  auto run_program = [&](const ControlProgram& program, double origin, double spacing) {
    IntegratorOptions o = detail::plant_options(opt, x);
    o.sample_spacing = spacing;
    o.sample_origin = origin;
    if (traj.samples.size() > 1) traj.events.push_back(t);
    auto piece = integrate(sys, x, program, o, t);
    x = piece.final_state();
    t = piece.back().t;
    for (std::size_t i = 1; i < piece.samples.size(); ++i) {
      auto s = std::move(piece.samples[i]);
      s.segment += segment_index;
      traj.samples.push_back(std::move(s));
    }
    for (double e : piece.events) traj.events.push_back(e);
    segment_index += static_cast<int>(program.size());
    traj.max_V = std::max(traj.max_V, piece.max_V);
    return piece.max_V;
  };

  traj.samples.push_back({0.0, x.vector(), sys.V_at(x.coords()), 0, false});
  traj.max_V = traj.samples.back().V;
  report.status = LoopStatus::HorizonReached;

  if (x.norm() <= opt.stop_radius) {
    report.status = LoopStatus::Converged;
  } else {
    checkpoint(0.0, x);
    for (std::size_t i = 0; t < horizon; ++i) {
      const double Ti = partition.time(i);
      const double Tnext = std::min(partition.time(i + 1), horizon);
      IntervalOutcome outcome;
      outcome.start = Ti;
      outcome.end = Tnext;
      outcome.x_start = x;
      outcome.plan = plan_interval(sys, x, Tnext - Ti, opt);
      const auto& plan = outcome.plan;
      const double spacing = (Tnext - Ti) / opt.samples_per_interval;
      try {
        for (std::size_t k = 0; k < plan.steps.size(); ++k) {
          if (k > 0 || traj.checkpoints.back().t != t) checkpoint(t, x);
          const double V_start = traj.checkpoints.back().V;
          const double peak = run_program(plan.steps[k].program, Ti, spacing);
          overshoot = std::max(overshoot, peak / V_start);
        }
        if (plan.held > 0.0 && plan.status == LoopStatus::HorizonReached && !plan.reached_target) {
          const double V_ref = traj.checkpoints.back().V;
          const double peak = run_program(ControlProgram({{0.0, plan.held}}), Ti, spacing);
          overshoot = std::max(overshoot, peak / V_ref);
        }
      } catch (const Error& e) {
        report.status = LoopStatus::IntegrationFailed;
        report.message = e.what();
        report.intervals.push_back(std::move(outcome));
        break;
      }
      if (plan.status == LoopStatus::HorizonReached && !plan.reached_target && !plan.program.empty()) {
        // Summed step durations may miss T_{i+1} by rounding.
        traj.samples.back().t = Tnext;
        t = Tnext;
      }
      const LoopStatus st = plan.status;
      const bool reached = plan.reached_target;
      std::string msg = plan.message;
      report.intervals.push_back(std::move(outcome));
      if (st != LoopStatus::HorizonReached) {
        report.status = st;
        report.message = "interval [" + detail::format_number(Ti) + ", " + detail::format_number(Tnext) + "): " + msg;
        break;
      }
      if (reached || x.norm() <= opt.stop_radius) {
        report.status = LoopStatus::Converged;
        break;
      }
      if (Tnext >= horizon) break;
      t = Tnext;
    }
    if (traj.checkpoints.back().t != t) checkpoint(t, x);
  }

  report.final_state = x;
  report.final_norm = x.norm();
  report.final_time = t;
  report.overshoot_ratio = overshoot;
  detail::fill_thresholds(traj, report, opt.thresholds);
  return out;
}

struct FactCheck {
  std::string name;
  bool passed = true;
  std::string detail;
};

/// Checks on a closed-loop run: (a) checkpoint V strictly decreasing, (b) V(s) <= a_factor times
/// V at the latest checkpoint not after s, (c) every attained threshold mu is never exceeded again.
inline std::vector<FactCheck> verify_facts(const Trajectory& traj, const LoopReport& report, double a_factor = 2.0,
                                           double slack = 1e-9) {
  std::vector<FactCheck> out;

  FactCheck a{"checkpoint-decrease", true, ""};
  double min_drop = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < traj.checkpoints.size(); ++k) {
    const double drop = traj.checkpoints[k - 1].V - traj.checkpoints[k].V;
    min_drop = std::min(min_drop, drop);
    if (!(drop > 0.0) && a.passed) {
      a.passed = false;
      a.detail = "V does not decrease at checkpoint " + std::to_string(k) + " (t = " +
                 detail::format_number(traj.checkpoints[k].t) + ")";
    }
  }
  if (a.passed)
    a.detail = traj.checkpoints.size() < 2 ? "fewer than two checkpoints" : "empirical L = " + detail::format_number(min_drop);
  out.push_back(a);

  FactCheck b{"overshoot-bound", true, ""};
  double worst = 0.0;
  std::size_t c = 0;
  for (const auto& s : traj.samples) {
    while (c + 1 < traj.checkpoints.size() && traj.checkpoints[c + 1].t <= s.t) ++c;
    if (traj.checkpoints.empty() || traj.checkpoints[c].t > s.t) continue;
    const double ref = traj.checkpoints[c].V;
    if (ref > 0.0) worst = std::max(worst, s.V / ref);
    if (s.V > a_factor * ref * (1.0 + slack) && b.passed) {
      b.passed = false;
      b.detail = "V exceeds the bound at t = " + detail::format_number(s.t);
    }
  }
  if (b.passed) b.detail = "max ratio " + detail::format_number(worst);
  out.push_back(b);

  FactCheck att{"attractivity", true, ""};
  int attained = 0;
  for (const auto& th : report.thresholds) {
    if (!th.time) continue;
    ++attained;
    for (const auto& s : traj.samples)
      if (s.t >= *th.time && s.V > th.mu && att.passed) {
        att.passed = false;
        att.detail = "V returns above mu = " + detail::format_number(th.mu) + " at t = " + detail::format_number(s.t);
      }
  }
  if (att.passed) att.detail = std::to_string(attained) + " of " + std::to_string(report.thresholds.size()) + " thresholds attained";
  out.push_back(att);
  return out;
}

}  // namespace sdstab
