#include <CLI11.hpp>

#include <iostream>

#include "sdstab/cli.hpp"

int main(int argc, char** argv) {
  using sdstab::cli::Command;
  sdstab::cli::RunConfig cfg;
  CLI::App app{"Sampled-data feedback stabilization of control-affine systems"};
  app.require_subcommand(1);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--system", cfg.system, "system file")->required();
    sub->add_option("--nmax", cfg.nmax, "highest bracket order N tried (1..4)");
    sub->add_option("--tol", cfg.tol, "zero-test tolerance");
    sub->add_option("--rtol", cfg.rtol, "integrator relative tolerance");
    sub->add_option("--out", cfg.out, "directory for CSV and gnuplot files");
  };
  auto point = [&](CLI::App* sub) { sub->add_option("--at,--x0", cfg.at, "state, comma separated")->required(); };

  auto* certify = app.add_subcommand("certify", "classify one state");
  common(certify);
  point(certify);

  auto* grid = app.add_subcommand("certify-grid", "classify every state of a grid");
  common(grid);
  grid->add_option("--box", cfg.box, "lo:hi per coordinate, comma separated")->required();
  grid->add_option("--res", cfg.res, "points per coordinate, comma separated")->required();
  grid->add_option("--threads", cfg.threads, "worker threads (0 = hardware)");

  auto* step = app.add_subcommand("step", "synthesize one decreasing control step");
  common(step);
  point(step);
  step->add_option("--xi", cfg.xi, "largest step duration (default 0.5)");

  auto* simulate = app.add_subcommand("simulate", "run the sampled-data closed loop");
  common(simulate);
  simulate->add_option("--x0,--at", cfg.x0, "initial state")->required();
  simulate->add_option("--partition", cfg.partition, "uniform:STEP or explicit:t1,t2,...[;tail=STEP]")
      ->capture_default_str();
  simulate->add_option("--horizon", cfg.horizon, "final time")->capture_default_str();
  simulate->add_option("--xi", cfg.xi, "largest duration of one step inside an interval");
  simulate->add_option("--stop-radius", cfg.stop_radius, "stop once |x| falls below this")->capture_default_str();

  auto* dm = app.add_subcommand("diagnose-m", "estimate derivatives of m(t) = V(R(t)) at t = 0");
  common(dm);
  point(dm);
  dm->add_option("--rho", cfg.rho)->capture_default_str();
  dm->add_option("--u1", cfg.u1)->capture_default_str();
  dm->add_option("--order", cfg.order, "highest derivative (1..4)")->capture_default_str();

  auto* cbh = app.add_subcommand("cbh-check", "compare R(t) with the truncated bracket series");
  common(cbh);
  point(cbh);
  cbh->add_option("--rho", cfg.rho)->capture_default_str();
  cbh->add_option("--u1", cfg.u1)->capture_default_str();
  cbh->add_option("--k", cfg.k, "truncation order (0..4)")->capture_default_str();
  cbh->add_option("--t,--times", cfg.times, "times, comma separated")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  auto* chosen = app.get_subcommands().front();
  cfg.command = *sdstab::cli::command_from_name(chosen->get_name());
  return sdstab::cli::run(cfg, std::cout, std::cerr);
}
