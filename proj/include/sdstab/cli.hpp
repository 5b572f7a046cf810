#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sdstab/closed_loop.hpp"
#include "sdstab/io.hpp"

namespace sdstab::cli {

struct UsageError : Error {
  using Error::Error;
};

enum class Command { Certify, CertifyGrid, Step, Simulate, DiagnoseM, CbhCheck };

inline std::optional<Command> command_from_name(std::string_view s) {
  static const std::map<std::string_view, Command> names{
      {"certify", Command::Certify},     {"certify-grid", Command::CertifyGrid}, {"step", Command::Step},
      {"simulate", Command::Simulate},   {"diagnose-m", Command::DiagnoseM},     {"cbh-check", Command::CbhCheck}};
  auto it = names.find(s);
  if (it == names.end()) return std::nullopt;
  return it->second;
}

struct RunConfig {
  Command command = Command::Certify;
  std::string system;
  std::string at;
  std::string x0;
  std::string box;
  std::string res;
  std::string partition = "uniform:0.5";
  double horizon = 50.0;
  int nmax = 4;
  /// Largest duration of one synthesized step; 0 means 0.5 for `step` and the interval length for `simulate`.
  double xi = 0.0;
  /// Zero-test tolerance of the certificate.
  double tol = 1e-9;
  /// Integrator relative tolerance.
  double rtol = 1e-10;
  double stop_radius = 1e-3;
  double rho = 1.0;
  double u1 = 1.0;
  int order = 2;
  int k = 2;
  std::string times = "0.01,0.02,0.05,0.1";
  std::string out;
  unsigned threads = 0;
};

namespace detail {

inline double parse_number(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::logic_error&) {
    throw UsageError("invalid number '" + s + "' in " + what);
  }
  while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) ++used;
  if (used != s.size() || !std::isfinite(v)) throw UsageError("invalid number '" + s + "' in " + what);
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out(1);
  for (char c : s) {
    if (c == sep)
      out.emplace_back();
    else
      out.back() += c;
  }
  return out;
}

}  // namespace detail

inline std::vector<double> parse_list(const std::string& s, const std::string& what) {
  if (s.empty()) throw UsageError("missing value for " + what);
  std::vector<double> out;
  for (const auto& part : detail::split(s, ',')) out.push_back(detail::parse_number(part, what));
  return out;
}

inline EvalPoint parse_point(const std::string& s, const std::string& what = "point") {
  return EvalPoint(parse_list(s, what));
}

inline Box parse_box(const std::string& s) {
  if (s.empty()) throw UsageError("missing value for --box");
  Box b;
  for (const auto& part : detail::split(s, ',')) {
    auto lh = detail::split(part, ':');
    if (lh.size() != 2) throw UsageError("box entries must look like lo:hi, got '" + part + "'");
    b.lo.push_back(detail::parse_number(lh[0], "--box"));
    b.hi.push_back(detail::parse_number(lh[1], "--box"));
    if (b.hi.back() < b.lo.back()) throw UsageError("box entry '" + part + "' has hi < lo");
  }
  return b;
}

inline std::vector<int> parse_resolution(const std::string& s) {
  std::vector<int> out;
  for (double v : parse_list(s, "--res")) {
    if (v != std::floor(v) || v < 1 || v > 1e6) throw UsageError("resolution entries must be positive integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

/// "uniform:STEP" or "explicit:t1,t2,...[;tail=STEP]".
inline Partition parse_partition(const std::string& s) {
  auto colon = s.find(':');
  if (colon == std::string::npos) throw UsageError("partition must be uniform:STEP or explicit:t1,t2,...");
  const std::string kind = s.substr(0, colon), rest = s.substr(colon + 1);
  try {
    if (kind == "uniform") return Partition::uniform(detail::parse_number(rest, "--partition"));
    if (kind == "explicit") {
      auto parts = detail::split(rest, ';');
      std::optional<double> tail;
      if (parts.size() > 2) throw UsageError("explicit partition takes at most one ';tail=STEP'");
      if (parts.size() == 2) {
        if (parts[1].rfind("tail=", 0) != 0) throw UsageError("expected ';tail=STEP' in partition");
        tail = detail::parse_number(parts[1].substr(5), "--partition");
      }
      return Partition::explicit_times(parse_list(parts[0], "--partition"), tail);
    }
  } catch (const PreconditionError& e) {
    throw UsageError(std::string("invalid partition: ") + e.what());
  }
  throw UsageError("unknown partition kind '" + kind + "'");
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << content;
  if (!f) throw IoError("error while writing '" + path.string() + "'");
}

inline std::optional<std::filesystem::path> out_dir(const RunConfig& cfg) {
  if (cfg.out.empty()) return std::nullopt;
  std::error_code ec;
  std::filesystem::create_directories(cfg.out, ec);
  if (ec) throw IoError("cannot create output directory '" + cfg.out + "': " + ec.message());
  return std::filesystem::path(cfg.out);
}

inline EvalPoint require_point(const SystemDef& sys, const std::string& text, const char* flag) {
  if (text.empty()) throw UsageError(std::string("missing ") + flag);
  auto p = parse_point(text, flag);
  if (p.dim() != sys.dim())
    throw UsageError(std::string(flag) + " has " + std::to_string(p.dim()) + " coordinates, the system has dimension " +
                     std::to_string(sys.dim()));
  return p;
}

inline void print_certificate(std::ostream& os, const Certificate& c) {
  os << "case=" << to_string(c.kind) << " N=" << c.N << "\n";
  for (const auto& w : c.witnesses) os << "  " << w.name << " = " << format_double(w.value) << "\n";
  if (!c.note.empty()) os << "  note: " << c.note << "\n";
}

inline void print_program(std::ostream& os, const ControlProgram& p) {
  for (std::size_t i = 0; i < p.size(); ++i)
    os << "  segment " << i << ": u = " << format_double(p.segments()[i].value)
       << " for " << format_double(p.segments()[i].duration) << "\n";
}

inline CertifyOptions certify_options(const RunConfig& cfg) {
  if (cfg.nmax < 1 || cfg.nmax > 4) throw UsageError("--nmax must be in 1..4");
  if (!(cfg.tol > 0.0)) throw UsageError("--tol must be positive");
  return {cfg.tol, cfg.nmax};
}

inline SynthOptions synth_options(const RunConfig& cfg) {
  if (!(cfg.rtol > 0.0)) throw UsageError("--rtol must be positive");
  SynthOptions o;
  o.certify = certify_options(cfg);
  o.rtol = cfg.rtol;
  return o;
}

inline int certify(const RunConfig& cfg, const SystemDef& sys, std::ostream& os) {
  auto x = require_point(sys, cfg.at, "--at");
  auto c = certify_point(sys, x, certify_options(cfg));
  print_certificate(os, c);
  if (auto dir = out_dir(cfg)) {
    std::ostringstream csv;
    write_certificate_header(csv, sys.dim());
    write_certificate_rows(csv, x, c);
    write_file(*dir / "certificate.csv", csv.str());
  }
  return c.conclusive() ? 0 : 2;
}

inline int certify_grid_cmd(const RunConfig& cfg, const SystemDef& sys, std::ostream& os) {
  if (cfg.box.empty()) throw UsageError("missing --box");
  if (cfg.res.empty()) throw UsageError("missing --res");
  auto box = parse_box(cfg.box);
  auto res = parse_resolution(cfg.res);
  if (box.lo.size() != static_cast<std::size_t>(sys.dim()) || res.size() != static_cast<std::size_t>(sys.dim()))
    throw UsageError("--box and --res need one entry per state dimension");
  auto grid = certify_grid(sys, box, res, certify_options(cfg), cfg.threads);
  std::map<std::string, int> counts;
  for (const auto& gc : grid)
    ++counts[gc.certificate ? std::string(to_string(gc.certificate->kind)) : std::string("skipped-origin")];
  os << "points=" << grid.size() << "\n";
  for (const auto& [name, n] : counts) os << "  " << name << ": " << n << "\n";
  if (auto dir = out_dir(cfg)) {
    std::ostringstream csv;
    write_grid_csv(csv, grid, sys.dim());
    write_file(*dir / "certificates.csv", csv.str());
    if (sys.dim() == 2) write_file(*dir / "grid.gp", grid_plot_script("certificates.csv", "grid.png"));
  }
  return counts.count("Inconclusive") ? 2 : 0;
}

inline int step(const RunConfig& cfg, const SystemDef& sys, std::ostream& os) {
  auto x = require_point(sys, cfg.at.empty() ? cfg.x0 : cfg.at, "--at");
  const double xi = cfg.xi > 0.0 ? cfg.xi : 0.5;
  StepResult r;
  try {
    r = synthesize_step(sys, x, xi, synth_options(cfg));
  } catch (const CertificateInconclusive& e) {
    print_certificate(os, e.certificate);
    os << "inconclusive: no step synthesized\n";
    return 2;
  } catch (const SynthesisFailed& e) {
    print_certificate(os, e.certificate);
    os << "synthesis failed after " << e.simulations << " simulations, best V-drop " << format_double(e.best_drop)
       << "\n";
    return 2;
  }
  print_certificate(os, r.certificate);
  if (r.program.size() == 2) os << "rho=" << format_double(r.rho) << " u1=" << format_double(r.u1) << "\n";
  print_program(os, r.program);
  os << "drop=" << format_double(r.drop) << " sup_ratio=" << format_double(r.sup_ratio)
     << " simulations=" << r.simulations << (r.used_fallback ? " (general search)" : "") << "\n";
  if (auto dir = out_dir(cfg)) {
    IntegratorOptions o;
    o.rtol = cfg.rtol;
    o.atol = cfg.rtol * 1e-2 * x.norm();
    o.sample_spacing = r.program.total_duration() / 100.0;
    auto tr = integrate(sys, x, r.program, o);
    tr.samples.front().checkpoint = true;
    tr.samples.back().checkpoint = true;
    std::ostringstream csv;
    write_trajectory_csv(csv, tr, sys.dim());
    write_file(*dir / "step.csv", csv.str());
    write_file(*dir / "step.gp", trajectory_plot_script("step.csv", sys.dim(), "step.png"));
  }
  return 0;
}

inline int simulate(const RunConfig& cfg, const SystemDef& sys, std::ostream& os) {
  auto x0 = require_point(sys, cfg.x0.empty() ? cfg.at : cfg.x0, "--x0");
  auto partition = parse_partition(cfg.partition);
  if (!(cfg.horizon > 0.0)) throw UsageError("--horizon must be positive");
  if (!(cfg.stop_radius > 0.0)) throw UsageError("--stop-radius must be positive");
  LoopOptions o;
  o.synth = synth_options(cfg);
  o.rtol = cfg.rtol;
  o.stop_radius = cfg.stop_radius;
  if (cfg.xi > 0.0) o.xi_cap = cfg.xi;
  const double V0 = sys.V_at(x0.coords());
  for (double f : {1e-1, 1e-2, 1e-3, 1e-4}) o.thresholds.push_back(f * V0);
  auto result = run_closed_loop(sys, x0, partition, cfg.horizon, o);
  const auto& rep = result.report;
  const auto facts = verify_facts(result.trajectory, rep);

  std::ostringstream summary;
  summary << "status=" << to_string(rep.status) << "\n";
  if (!rep.message.empty()) summary << "message: " << rep.message << "\n";
  summary << "final_time=" << format_double(rep.final_time) << "\n";
  summary << "final_norm=" << format_double(rep.final_norm) << "\n";
  summary << "final_state=";
  for (int i = 0; i < rep.final_state.dim(); ++i)
    summary << (i ? "," : "") << format_double(rep.final_state[static_cast<std::size_t>(i)]);
  summary << "\nintervals=" << rep.intervals.size() << " checkpoints=" << rep.checkpoint_V.size() << "\n";
  summary << "overshoot_ratio=" << format_double(rep.overshoot_ratio) << "\n";
  for (const auto& th : rep.thresholds)
    summary << "V<=" << format_double(th.mu) << " from t=" << (th.time ? format_double(*th.time) : std::string("never"))
            << "\n";
  bool facts_ok = true;
  for (const auto& f : facts) {
    summary << "fact " << f.name << ": " << (f.passed ? "pass" : "FAIL") << " (" << f.detail << ")\n";
    facts_ok = facts_ok && f.passed;
  }
  os << summary.str();
  if (auto dir = out_dir(cfg)) {
    std::ostringstream csv;
    write_trajectory_csv(csv, result.trajectory, sys.dim());
    write_file(*dir / "trajectory.csv", csv.str());
    write_file(*dir / "report.txt", summary.str());
    write_file(*dir / "trajectory.gp", trajectory_plot_script("trajectory.csv", sys.dim(), "trajectory.png"));
  }
  switch (rep.status) {
    case LoopStatus::SynthesisFailed:
    case LoopStatus::Inconclusive:
      return 2;
    case LoopStatus::IntegrationFailed:
      return 1;
    default:
      return facts_ok ? 0 : 1;
  }
}

inline int diagnose_m(const RunConfig& cfg, const SystemDef& sys, std::ostream& os) {
  auto x = require_point(sys, cfg.at.empty() ? cfg.x0 : cfg.at, "--at");
  if (cfg.order < 1 || cfg.order > 4) throw UsageError("--order must be in 1..4");
  if (!(cfg.rho > 0.0)) throw UsageError("--rho must be positive");
  auto d = m_derivative_estimates(sys, x, cfg.rho, cfg.u1, cfg.order);
  for (int n = 1; n <= cfg.order; ++n)
    os << "m^(" << n << ")(0) = " << format_double(d[n]) << "  noise " << format_double(d.noise_of(n)) << "\n";
  if (d.ill_conditioned) os << "warning: estimates are ill-conditioned\n";
  if (auto dir = out_dir(cfg)) {
    std::ostringstream est, series;
    est << "n,estimate,noise\n";
    for (int n = 1; n <= cfg.order; ++n) est << n << ',' << format_double(d[n]) << ',' << format_double(d.noise_of(n)) << '\n';
    write_file(*dir / "m_derivatives.csv", est.str());
    series << "t,m\n";
    const double h = 0.05 / ((1.0 + cfg.rho) * (1.0 + std::max(1.0, cfg.rho) * std::fabs(cfg.u1)));
    for (int j = 0; j <= 40; ++j) {
      double t = j * h / 4;
      series << format_double(t) << ',' << format_double(m_of_t(sys, x, cfg.rho, cfg.u1, t)) << '\n';
    }
    write_file(*dir / "m.csv", series.str());
    write_file(*dir / "m.gp", series_plot_script("m.csv", "m.png", "t", "m(t)", false));
  }
  return 0;
}

inline int cbh_check(const RunConfig& cfg, const SystemDef& sys, std::ostream& os) {
  auto x = require_point(sys, cfg.at.empty() ? cfg.x0 : cfg.at, "--at");
  if (cfg.k < 0 || cfg.k > 4) throw UsageError("--k must be in 0..4");
  if (!(cfg.rho > 0.0)) throw UsageError("--rho must be positive");
  auto ts = parse_list(cfg.times, "--times");
  for (double t : ts)
    if (!(t > 0.0)) throw UsageError("--times entries must be positive");
  CbhProbe probe(sys, x, cfg.rho, cfg.u1, cfg.k);
  std::vector<double> rs;
  std::ostringstream csv;
  csv << "t,residual\n";
  for (double t : ts) {
    rs.push_back(probe(t));
    os << "t=" << format_double(t) << " residual=" << format_double(rs.back()) << "\n";
    csv << format_double(t) << ',' << format_double(rs.back()) << '\n';
  }
  bool positive = ts.size() >= 2;
  for (double r : rs) positive = positive && r > 0.0;
  if (positive) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) mx += std::log(ts[i]), my += std::log(rs[i]);
    mx /= static_cast<double>(ts.size());
    my /= static_cast<double>(ts.size());
    double num = 0, den = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      num += (std::log(ts[i]) - mx) * (std::log(rs[i]) - my);
      den += (std::log(ts[i]) - mx) * (std::log(ts[i]) - mx);
    }
    os << "slope=" << format_double(num / den) << "\n";
  }
  if (auto dir = out_dir(cfg)) {
    write_file(*dir / "cbh.csv", csv.str());
    write_file(*dir / "cbh.gp", series_plot_script("cbh.csv", "cbh.png", "t", "residual", true));
  }
  return 0;
}

}  // namespace detail

/// Dispatches one command. Returns 0 on success, 2 when the certificate is inconclusive or synthesis
/// fails, 1 on any error (reported on `err`).
inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    if (cfg.system.empty()) throw UsageError("missing --system");
    SystemDef sys = load_system(cfg.system);
    switch (cfg.command) {
      case Command::Certify:
        return detail::certify(cfg, sys, out);
      case Command::CertifyGrid:
        return detail::certify_grid_cmd(cfg, sys, out);
      case Command::Step:
        return detail::step(cfg, sys, out);
      case Command::Simulate:
        return detail::simulate(cfg, sys, out);
      case Command::DiagnoseM:
        return detail::diagnose_m(cfg, sys, out);
      case Command::CbhCheck:
        return detail::cbh_check(cfg, sys, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace sdstab::cli
