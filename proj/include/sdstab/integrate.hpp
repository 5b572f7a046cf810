#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sdstab/errors.hpp"
#include "sdstab/system.hpp"

namespace sdstab {

/// Constant input `value` held for `duration`.
struct Segment {
  double value = 0.0;
  double duration = 0.0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Piecewise constant open-loop input starting at local time 0.
class ControlProgram {
 public:
  ControlProgram() = default;
  explicit ControlProgram(std::vector<Segment> segments) {
    for (const auto& s : segments) append(s);
  }

  void append(Segment s) {
    if (!(s.duration > 0.0) || !std::isfinite(s.duration))
      throw PreconditionError("segment duration must be positive, got " + std::to_string(s.duration));
    if (!std::isfinite(s.value)) throw PreconditionError("segment value must be finite");
    segments_.push_back(s);
    total_ += s.duration;
  }

  void append(const ControlProgram& other) {
    for (const auto& s : other.segments_) append(s);
  }

  const std::vector<Segment>& segments() const { return segments_; }
  std::size_t size() const { return segments_.size(); }
  bool empty() const { return segments_.empty(); }
  double total_duration() const { return total_; }

  /// Input applied at local time s; segment k covers [start_k, end_k), the last one is closed.
  double value_at(double s) const {
    double start = 0.0;
    for (std::size_t k = 0; k < segments_.size(); ++k) {
      double end = start + segments_[k].duration;
      if (s < end || k + 1 == segments_.size()) return segments_[k].value;
      start = end;
    }
    return 0.0;
  }

  friend bool operator==(const ControlProgram&, const ControlProgram&) = default;

 private:
  std::vector<Segment> segments_;
  double total_ = 0.0;
};

struct IntegratorOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double divergence_bound = 1e6;
  /// When positive, every segment is split into this many equal steps and no error control is done.
  int fixed_steps = 0;
  std::size_t max_steps = 2'000'000;
  /// Spacing of recorded samples; 0 records every accepted step.
  double sample_spacing = 0.0;
  /// Anchor of the sample grid; the start time when unset.
  std::optional<double> sample_origin;
};

struct Sample {
  double t = 0.0;
  std::vector<double> x;
  double V = 0.0;
  int segment = 0;
  bool checkpoint = false;
};

struct Trajectory {
  std::vector<Sample> samples;
  std::vector<Sample> checkpoints;
  /// Times at which the input switches.
  std::vector<double> events;
  /// Largest V seen at step ends and step midpoints, which is finer than `samples` may be.
  double max_V = -std::numeric_limits<double>::infinity();

  const Sample& back() const { return samples.back(); }
  EvalPoint final_state() const { return EvalPoint(samples.back().x); }
};

/// Dormand-Prince 5(4) stepper for xdot = f(x) + u g(x) with piecewise constant u.
class Stepper {
 public:
  Stepper(SystemDef sys, IntegratorOptions opt) : sys_(std::move(sys)), opt_(opt) {
    const auto n = static_cast<std::size_t>(sys_.dim());
    for (auto* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &tmp_, &xnew_}) v->assign(n, 0.0);
  }

  const IntegratorOptions& options() const { return opt_; }

  /// Integrates from (t, x) with input u for `duration`, landing exactly on t + duration.
  /// obs(t0, x0, f0, t1, x1, f1) runs after each accepted step with the endpoint derivatives.
  template <typename Obs>
  void segment(double& t, std::vector<double>& x, double u, double duration, Obs&& obs) {
    if (!(duration > 0.0)) throw PreconditionError("segment duration must be positive");
    const double t_start = t, t_end = t + duration;
    double s = 0.0;
    sys_.rhs(x, u, k1_);
    double h = opt_.fixed_steps > 0 ? duration / opt_.fixed_steps : initial_step(x, duration);
    std::size_t steps = 0;
    while (s < duration) {
      if (++steps > opt_.max_steps) throw IntegrationError("step limit exceeded");
      const bool last = s + h >= duration * (1.0 - 1e-12);
      if (last) h = duration - s;
      trial(x, u, h);
      double err = opt_.fixed_steps > 0 ? 0.0 : error_norm(x);
      if (!(err <= 1.0)) {
        double fac = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
        h *= fac;
        if (h < duration * 1e-13) throw IntegrationError("step size underflow at t = " + std::to_string(t_start + s));
        continue;
      }
      const double t0 = t_start + s;
      s = last ? duration : s + h;
      const double t1 = last ? t_end : t_start + s;
      obs(t0, std::as_const(x), std::as_const(k1_), t1, std::as_const(xnew_), std::as_const(k7_));
      x.swap(xnew_);
      k1_.swap(k7_);
      check_divergence(x, t1);
      if (opt_.fixed_steps == 0) {
        double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        h *= fac;
        last_h_ = h;
      }
    }
    t = t_end;
  }

 private:
  double initial_step(const std::vector<double>& x, double duration) const {
    if (last_h_ > 0.0) return std::min(last_h_, duration);
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double sc = opt_.atol + opt_.rtol * std::fabs(x[i]);
      d0 = std::max(d0, std::fabs(x[i]) / sc);
      d1 = std::max(d1, std::fabs(k1_[i]) / sc);
    }
    double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::max(h, 1e-6);
    return std::min(h, duration);
  }

  void stage(const std::vector<double>& x, double h, std::initializer_list<std::pair<double, const std::vector<double>*>> terms) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      double acc = 0.0;
      for (const auto& [a, k] : terms) acc += a * (*k)[i];
      tmp_[i] = x[i] + h * acc;
    }
  }

  void trial(const std::vector<double>& x, double u, double h) {
    stage(x, h, {{1.0 / 5, &k1_}});
    sys_.rhs(tmp_, u, k2_);
    stage(x, h, {{3.0 / 40, &k1_}, {9.0 / 40, &k2_}});
    sys_.rhs(tmp_, u, k3_);
    stage(x, h, {{44.0 / 45, &k1_}, {-56.0 / 15, &k2_}, {32.0 / 9, &k3_}});
    sys_.rhs(tmp_, u, k4_);
    stage(x, h, {{19372.0 / 6561, &k1_}, {-25360.0 / 2187, &k2_}, {64448.0 / 6561, &k3_}, {-212.0 / 729, &k4_}});
    sys_.rhs(tmp_, u, k5_);
    stage(x, h,
          {{9017.0 / 3168, &k1_}, {-355.0 / 33, &k2_}, {46732.0 / 5247, &k3_}, {49.0 / 176, &k4_},
           {-5103.0 / 18656, &k5_}});
    sys_.rhs(tmp_, u, k6_);
    for (std::size_t i = 0; i < x.size(); ++i)
      xnew_[i] = x[i] + h * (35.0 / 384 * k1_[i] + 500.0 / 1113 * k3_[i] + 125.0 / 192 * k4_[i] -
                             2187.0 / 6784 * k5_[i] + 11.0 / 84 * k6_[i]);
    sys_.rhs(xnew_, u, k7_);
    h_ = h;
  }

  double error_norm(const std::vector<double>& x) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double e = h_ * (71.0 / 57600 * k1_[i] - 71.0 / 16695 * k3_[i] + 71.0 / 1920 * k4_[i] -
                       17253.0 / 339200 * k5_[i] + 22.0 / 525 * k6_[i] - 1.0 / 40 * k7_[i]);
      double sc = opt_.atol + opt_.rtol * std::max(std::fabs(x[i]), std::fabs(xnew_[i]));
      acc += (e / sc) * (e / sc);
    }
    return std::sqrt(acc / static_cast<double>(x.size()));
  }

  void check_divergence(const std::vector<double>& x, double t) const {
    double n2 = 0.0;
    for (double v : x) n2 += v * v;
    if (!(std::sqrt(n2) <= opt_.divergence_bound))
      throw IntegrationError("state norm exceeded divergence bound at t = " + std::to_string(t));
  }

  SystemDef sys_;
  IntegratorOptions opt_;
  std::vector<double> k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, xnew_;
  double h_ = 0.0;
  double last_h_ = 0.0;
};

namespace detail {

/// Cubic Hermite interpolation on a step at fraction th of its length.
inline void hermite(double th, double h, const std::vector<double>& x0, const std::vector<double>& f0,
                    const std::vector<double>& x1, const std::vector<double>& f1, std::vector<double>& out) {
  const double h00 = (1 + 2 * th) * (1 - th) * (1 - th), h10 = th * (1 - th) * (1 - th);
  const double h01 = th * th * (3 - 2 * th), h11 = th * th * (th - 1);
  out.resize(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i)
    out[i] = h00 * x0[i] + h10 * h * f0[i] + h01 * x1[i] + h11 * h * f1[i];
}

}  // namespace detail

/// Integrates the program from x0 starting at time t0. Samples are taken at the start, on the grid
/// origin + k * sample_spacing (every accepted step when the spacing is 0) and at every segment end.
inline Trajectory integrate(const SystemDef& sys, const EvalPoint& x0, const ControlProgram& program,
                            const IntegratorOptions& opt = {}, double t0 = 0.0) {
  if (x0.dim() != sys.dim())
    throw DimensionError("initial state has dimension " + std::to_string(x0.dim()) + ", system has " +
                         std::to_string(sys.dim()));
  Trajectory traj;
  std::vector<double> x = x0.vector();
  auto push = [&](double t, const std::vector<double>& state, int seg) {
    double v = sys.V_at(state);
    traj.samples.push_back({t, state, v, seg, false});
    traj.max_V = std::max(traj.max_V, v);
  };
  push(t0, x, 0);
  if (program.empty()) return traj;

  Stepper stepper(sys, opt);
  const double spacing = opt.sample_spacing;
  const double origin = opt.sample_origin.value_or(t0);
  double t = t0;
  std::vector<double> mid;
  for (std::size_t k = 0; k < program.size(); ++k) {
    const auto& seg = program.segments()[k];
    const int idx = static_cast<int>(k);
    const double seg_end = t + seg.duration;
    const double guard = spacing > 0.0 ? 1e-9 * spacing : 0.0;
    long next = spacing > 0.0 ? static_cast<long>(std::floor((t - origin) / spacing)) + 1 : 0;
    stepper.segment(t, x, seg.value, seg.duration,
                    [&](double ta, const std::vector<double>& xa, const std::vector<double>& fa, double tb,
                        const std::vector<double>& xb, const std::vector<double>& fb) {
                      const double h = tb - ta;
                      detail::hermite(0.5, h, xa, fa, xb, fb, mid);
                      traj.max_V = std::max({traj.max_V, sys.V_at(mid), sys.V_at(xb)});
                      if (spacing <= 0.0) {
                        if (tb < seg_end) push(tb, xb, idx);
                        return;
                      }
                      for (;; ++next) {
                        double ts = origin + static_cast<double>(next) * spacing;
                        if (ts > tb || ts >= seg_end - guard) break;
                        if (ts <= ta) continue;
                        detail::hermite((ts - ta) / h, h, xa, fa, xb, fb, mid);
                        push(ts, mid, idx);
                      }
                    });
    push(t, x, idx);
    if (k + 1 < program.size()) traj.events.push_back(t);
  }
  return traj;
}

}  // namespace sdstab
