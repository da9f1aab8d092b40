#include <hodgefem/mesh.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

CmdResult run_cli(const std::string& args, const fs::path& dir) {
  fs::create_directories(dir);
  fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  std::string cmd = std::string(CLI_BINARY_PATH) + " " + args + " > " +
                    out.string() + " 2> " + err.string();
  int status = std::system(cmd.c_str());
  CmdResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "hodgefem_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// history.csv without the wall-time column (the only nondeterministic field)
std::string strip_wall_time(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    auto pos = line.rfind(',');
    out << line.substr(0, pos) << "\n";
  }
  return out.str();
}

} // namespace

TEST_CASE("mesh export reports and writes the icosahedron") {
  fs::path dir = scratch("mesh_export");
  fs::path out = dir / "m.off";
  CmdResult r = run_cli("mesh --output " + out.string(), dir);
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.out.find("12 vertices, 20 triangles, 30 edges") !=
          std::string::npos);
  std::string body = slurp(out);
  REQUIRE(body.rfind("OFF\n12 20 30\n", 0) == 0);
  REQUIRE(fs::exists(dir / "m.meta.json"));
}

TEST_CASE("mesh refinement matches the library count") {
  fs::path dir = scratch("mesh_refine");
  int expected =
      hodgefem::uniform_refine(hodgefem::build_initial("sphere", "icosahedron"),
                               2)
          .n_tris();
  CmdResult r = run_cli(
      "mesh --refine 2 --output " + (dir / "m2.off").string(), dir);
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.out.find(std::to_string(expected) + " triangles") !=
          std::string::npos);
}

TEST_CASE("mesh import and re-export is byte-identical") {
  fs::path dir = scratch("mesh_reexport");
  fs::path a = dir / "a.off", b = dir / "b.off";
  REQUIRE(run_cli("mesh --refine 1 --output " + a.string(), dir).exit_code ==
          0);
  REQUIRE(run_cli("mesh --input " + a.string() + " --output " + b.string(),
                  dir)
              .exit_code == 0);
  REQUIRE(slurp(a) == slurp(b));
}

TEST_CASE("run terminates with exit 0 when the target is reached") {
  fs::path dir = scratch("run_eps");
  CmdResult r = run_cli("run --case y1:scale=1e-6 --eps 1e-3 --max-iter 5 "
                        "--out " +
                            dir.string(),
                        dir);
  REQUIRE(r.exit_code == 0);
  for (const char* f :
       {"history.csv", "final.off", "sigma.json", "u.json", "constants.json"})
    REQUIRE(fs::exists(dir / f));
  std::string hist = slurp(dir / "history.csv");
  REQUIRE(hist.rfind("schema_version,k,n_tri,", 0) == 0);
}

TEST_CASE("run returns exit 2 at the iteration cap") {
  fs::path dir = scratch("run_cap");
  CmdResult r = run_cli(
      "run --case y1 --eps 1e-9 --max-iter 3 --out " + dir.string(), dir);
  REQUIRE(r.exit_code == 2);
  std::istringstream hist(slurp(dir / "history.csv"));
  std::string line;
  int rows = -1; // header
  while (std::getline(hist, line)) ++rows;
  REQUIRE(rows == 4);
}

TEST_CASE("run rejects bad arguments with exit 1") {
  fs::path dir = scratch("run_bad");
  CmdResult bad_case = run_cli("run --case nosuch --out " + dir.string(), dir);
  REQUIRE(bad_case.exit_code == 1);
  REQUIRE(bad_case.err.find("case") != std::string::npos);
  REQUIRE(bad_case.err.find("nosuch") != std::string::npos);

  CmdResult bad_eps =
      run_cli("run --eps 0 --out " + dir.string(), dir);
  REQUIRE(bad_eps.exit_code == 1);
  REQUIRE(bad_eps.err.find("eps") != std::string::npos);
}

TEST_CASE("unknown config keys are rejected by name") {
  fs::path dir = scratch("run_badkey");
  fs::path cfg = dir / "run.cfg";
  std::ofstream(cfg) << "case = y1\nbogus_key = 1\n";
  CmdResult r = run_cli(
      "run --config " + cfg.string() + " --out " + dir.string(), dir);
  REQUIRE(r.exit_code == 1);
  REQUIRE(r.err.find("unknown config key") != std::string::npos);
  REQUIRE(r.err.find("bogus_key") != std::string::npos);
}

TEST_CASE("command-line flags override config file values") {
  fs::path dir = scratch("run_override");
  fs::path cfg = dir / "run.cfg";
  // config alone would stop immediately (huge target)
  std::ofstream(cfg) << "case = y1\neps = 10\nmax_iter = 7\n";
  CmdResult base = run_cli(
      "run --config " + cfg.string() + " --out " + (dir / "a").string(), dir);
  REQUIRE(base.exit_code == 0);
  CmdResult forced =
      run_cli("run --config " + cfg.string() + " --eps 1e-9 --max-iter 2 "
              "--out " +
                  (dir / "b").string(),
              dir);
  REQUIRE(forced.exit_code == 2);
  std::istringstream hist(slurp(dir / "b" / "history.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(hist, line)) ++rows;
  REQUIRE(rows == 3);
}

TEST_CASE("identical configurations produce identical histories") {
  fs::path dir = scratch("run_determinism");
  std::string args = "run --case y2 --theta 0.4 --eps 1e-9 --max-iter 4 ";
  REQUIRE(run_cli(args + "--out " + (dir / "a").string(), dir).exit_code == 2);
  REQUIRE(run_cli(args + "--out " + (dir / "b").string(), dir).exit_code == 2);
  REQUIRE(strip_wall_time(slurp(dir / "a" / "history.csv")) ==
          strip_wall_time(slurp(dir / "b" / "history.csv")));
  REQUIRE(slurp(dir / "a" / "sigma.json") == slurp(dir / "b" / "sigma.json"));
}

TEST_CASE("run snapshots export one mesh per iteration") {
  fs::path dir = scratch("run_snapshots");
  CmdResult r = run_cli("run --case y1 --eps 1e-9 --max-iter 2 --snapshots "
                        "--mesh-format obj --out " +
                            dir.string(),
                        dir);
  REQUIRE(r.exit_code == 2);
  for (int i = 0; i < 3; ++i)
    REQUIRE(fs::exists(dir / ("mesh_" + std::to_string(i) + ".obj")));
  REQUIRE(fs::exists(dir / "final.obj"));
}

TEST_CASE("verify runs a selected subset of checks") {
  fs::path dir = scratch("verify_subset");
  CmdResult r = run_cli("verify --checks pl1,pl2", dir);
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.out.find("pl1") != std::string::npos);
  REQUIRE(r.out.find("pl2") != std::string::npos);
  REQUIRE(r.out.find("FAIL") == std::string::npos);
  REQUIRE(r.out.find("poincare") == std::string::npos);
}

TEST_CASE("study writes a rates table for both series") {
  fs::path dir = scratch("study");
  CmdResult r = run_cli(
      "study --case y1 --max-iter 8 --levels 5 --out " + dir.string(), dir);
  REQUIRE(r.exit_code == 0);
  std::string rates = slurp(dir / "rates.csv");
  REQUIRE(rates.rfind("schema_version,series,level,n_tri,eta,err,fitted_s",
                      0) == 0);
  REQUIRE(rates.find("adaptive") != std::string::npos);
  REQUIRE(rates.find("uniform") != std::string::npos);

  CmdResult short_run =
      run_cli("study --case y1 --max-iter 2 --levels 3 --out " +
                  (dir / "short").string(),
              dir);
  REQUIRE(short_run.exit_code == 1);
  REQUIRE(short_run.err.find("too short") != std::string::npos);
}
