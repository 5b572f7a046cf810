#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "sdstab/cli.hpp"
#include "support.hpp"

using namespace sdstab;

namespace {

std::string systems_file(const char* name) { return std::string(SDSTAB_SYSTEMS_DIR) + "/" + name; }

/// Compares f, g and V of two systems at random states.
void check_same_system(const SystemDef& a, const SystemDef& b) {
  REQUIRE(a.dim() == b.dim());
  std::mt19937_64 rng(3);
  const auto n = static_cast<std::size_t>(a.dim());
  std::vector<double> ra(n), rb(n);
  for (int k = 0; k < 20; ++k) {
    auto x = test::random_point(rng, a.dim(), -2.0, 2.0);
    CHECK(a.V_at(x.coords()) == b.V_at(x.coords()));
    for (double u : {0.0, 1.0}) {
      a.rhs(x.coords(), u, ra);
      b.rhs(x.coords(), u, rb);
      CHECK(ra == rb);
    }
  }
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("sdstab_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(cli::RunConfig cfg) {
  std::ostringstream out, err;
  int code = cli::run(cfg, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("bundled system files load", "[io]") {
  auto dbl = load_system(systems_file("dblint.sys"));
  CHECK(dbl.dim() == 2);
  check_same_system(dbl, test::double_integrator());
  check_same_system(load_system(systems_file("example1.sys")), test::example1());
  auto e2 = load_system(systems_file("example2.sys"));
  CHECK(e2.dim() == 3);
  check_same_system(e2, test::example2());
}

TEST_CASE("system file syntax", "[io]") {
  auto s = parse_system(
      "# comment\n"
      "dim = 2   # trailing comment\n"
      "param k = 2\n"
      "param kk = k*k\n"
      "f = [\"x2\", \"-kk*x1\"]\n"
      "g = [\"0\", \"1\"]\n"
      "V = \"x1^2 + x2^2\"\n");
  std::vector<double> r(2);
  s.rhs(std::vector<double>{1.0, 0.0}, 0.0, r);
  CHECK(r[1] == -4.0);

  // Whole-word substitution only: "k" inside "kx" is untouched and fails as an unknown name.
  CHECK_THROWS_AS(parse_system("param k = 2\ndim = 1\nf = [\"kx\"]\ng = [\"1\"]\nV = \"x1^2\"\n"), ParseError);
  CHECK_THROWS_AS(parse_system("dim = 2\nf = [\"x2\"]\ng = [\"0\", \"1\"]\nV = \"x1^2\"\n"), DimensionError);
  CHECK_THROWS_AS(parse_system("dim = 2\ng = [\"0\", \"1\"]\nV = \"x1^2\"\n"), ParseError);
  CHECK_THROWS_AS(parse_system("dim = 1\ndim = 1\nf = [\"0\"]\ng = [\"1\"]\nV = \"x1^2\"\n"), ParseError);
  CHECK_THROWS_AS(parse_system("dim = 1\nh = [\"0\"]\n"), ParseError);
  CHECK_THROWS_AS(parse_system("param x1 = 2\n"), ParseError);
}

TEST_CASE("parse errors point at the file location", "[io]") {
  try {
    parse_system("dim = 2\nf = [\"x2\", \"x1 +* 3\"]\ng = [\"0\", \"1\"]\nV = \"x1^2\"\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
    // Column of the offending '*' counted from the start of the line.
    CHECK(e.column == 17);
  }
  try {
    load_system(systems_file("missing.sys"));
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("missing.sys") != std::string::npos);
  }
}

TEST_CASE("trajectory CSV round trip is exact", "[io][csv]") {
  auto sys = test::example2();
  ControlProgram p;
  p.append({0.7, 0.3});
  p.append({-1.0 / 3.0, 0.2});
  IntegratorOptions o;
  o.sample_spacing = 0.01;
  auto tr = integrate(sys, {1.0, 0.1, -0.2}, p, o);
  tr.samples[3].checkpoint = true;
  std::stringstream ss;
  write_trajectory_csv(ss, tr, 3);
  std::string header;
  std::getline(std::stringstream(ss.str()), header);
  CHECK(header == "t,x1,x2,x3,V,segment_index,is_checkpoint");
  auto back = read_trajectory_csv(ss);
  REQUIRE(back.size() == tr.samples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].t == tr.samples[i].t);
    CHECK(back[i].x == tr.samples[i].x);
    CHECK(back[i].V == tr.samples[i].V);
    CHECK(back[i].segment == tr.samples[i].segment);
    CHECK(back[i].checkpoint == tr.samples[i].checkpoint);
  }
}

TEST_CASE("certificate CSV quotes bracket names", "[io][csv]") {
  auto c = certify_point(test::double_integrator(), {1.0, 0.0});
  std::ostringstream os;
  write_certificate_header(os, 2);
  write_certificate_rows(os, {1.0, 0.0}, c);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "x1,x2,case,N,gV,fV,witness_name,witness_value");
  bool found = false;
  while (std::getline(is, line)) {
    auto fields = csv_split(line);
    REQUIRE(fields.size() == 8);
    CHECK(fields[2] == "P2");
    if (fields[6] == "[f,g]V") {
      found = true;
      CHECK(fields[7] == "-1");
    }
  }
  CHECK(found);
  CHECK(csv_split("a,\"b,\"\"c\"\"\",d") == std::vector<std::string>{"a", "b,\"c\"", "d"});
}

TEST_CASE("argument parsers", "[cli]") {
  CHECK(cli::parse_point("1,-2.5,3e-1").vector() == std::vector<double>{1.0, -2.5, 0.3});
  CHECK_THROWS_AS(cli::parse_point("1,,2"), cli::UsageError);
  CHECK_THROWS_AS(cli::parse_point("1,x"), cli::UsageError);
  auto b = cli::parse_box("-1:1,0:2");
  CHECK(b.lo == std::vector<double>{-1.0, 0.0});
  CHECK(b.hi == std::vector<double>{1.0, 2.0});
  CHECK_THROWS_AS(cli::parse_box("1:-1"), cli::UsageError);
  CHECK(cli::parse_resolution("5,7") == std::vector<int>{5, 7});
  CHECK_THROWS_AS(cli::parse_resolution("2.5"), cli::UsageError);
  CHECK(cli::parse_partition("uniform:0.25").time(4) == 1.0);
  auto p = cli::parse_partition("explicit:0,0.1,0.7;tail=0.5");
  CHECK(p.time(2) == 0.7);
  CHECK(p.time(3) == Catch::Approx(1.2));
  CHECK_THROWS_AS(cli::parse_partition("explicit:0,0.1;step=1"), cli::UsageError);
  CHECK_THROWS_AS(cli::parse_partition("uniform:-1"), cli::UsageError);
  CHECK_THROWS_AS(cli::parse_partition("regular:1"), cli::UsageError);
}

TEST_CASE("command exit codes", "[cli]") {
  cli::RunConfig cfg;
  cfg.system = systems_file("dblint.sys");
  cfg.at = "1,0";
  auto ok = run(cfg);
  CHECK(ok.code == 0);
  CHECK(ok.out.rfind("case=P2 N=1", 0) == 0);

  cfg.at = "0,0";
  auto origin = run(cfg);
  CHECK(origin.code == 1);
  CHECK_FALSE(origin.err.empty());

  cfg.at = "1,0,0";
  CHECK(run(cfg).code == 1);

  cfg.system = systems_file("missing.sys");
  CHECK(run(cfg).code == 1);

  auto dir = scratch_dir("drift");
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "drift.sys");
    f << "dim = 2\nf = [\"x1\", \"0\"]\ng = [\"0\", \"1\"]\nV = \"0.5*(x1^2+x2^2)\"\n";
  }
  cfg.system = (dir / "drift.sys").string();
  cfg.at = "1,0";
  CHECK(run(cfg).code == 2);
  cfg.command = cli::Command::Step;
  CHECK(run(cfg).code == 2);
  cfg.command = cli::Command::Simulate;
  cfg.x0 = "1,0";
  cfg.horizon = 2.0;
  CHECK(run(cfg).code == 2);
}

TEST_CASE("commands write their files", "[cli]") {
  auto dir = scratch_dir("outputs");
  cli::RunConfig cfg;
  cfg.system = systems_file("dblint.sys");
  cfg.out = dir.string();

  cfg.command = cli::Command::CertifyGrid;
  cfg.box = "-1:1,-1:1";
  cfg.res = "3,3";
  auto grid = run(cfg);
  CHECK(grid.code == 0);
  CHECK(std::filesystem::exists(dir / "certificates.csv"));
  CHECK(std::filesystem::exists(dir / "grid.gp"));

  cfg.command = cli::Command::Simulate;
  cfg.x0 = "0.3,0.2";
  cfg.horizon = 3.0;
  auto sim = run(cfg);
  CHECK(sim.code == 0);
  CHECK(sim.out.find("status=") != std::string::npos);
  std::ifstream f(dir / "trajectory.csv");
  auto samples = read_trajectory_csv(f);
  CHECK(samples.size() > 10);
  CHECK(std::filesystem::exists(dir / "report.txt"));

  cfg.command = cli::Command::DiagnoseM;
  cfg.at = "1,0";
  CHECK(run(cfg).code == 0);
  CHECK(std::filesystem::exists(dir / "m.csv"));

  cfg.command = cli::Command::CbhCheck;
  auto cbh = run(cfg);
  CHECK(cbh.code == 0);
  CHECK(std::filesystem::exists(dir / "cbh.csv"));

  cfg.command = cli::Command::Step;
  auto st = run(cfg);
  CHECK(st.code == 0);
  CHECK(std::filesystem::exists(dir / "step.csv"));
  std::filesystem::remove_all(dir);
}
