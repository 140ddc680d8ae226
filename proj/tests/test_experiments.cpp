#include <catch2/catch_amalgamated.hpp>

#include <msgfem/experiments.hpp>

#include <filesystem>
#include <fstream>

using namespace msgfem;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("msgfem_test_" + tag);
  fs::remove_all(p);
  return p;
}

RunConfig small_solve_config(const std::string& tag) {
  RunConfig c;
  c.experiment = "solve";
  c.mesh_cells = {24, 24};
  c.subdomains = {2, 2};
  c.overlap = 2;
  c.ell = 2;
  c.n = 4;
  c.coefficient = "skyscraper";
  c.contrast = 1e3;
  c.block_size = 4;
  c.out = scratch_dir(tag).string();
  return c;
}

}  // namespace

TEST_CASE("run configuration") {
  SECTION("serialize / parse round trip") {
    RunConfig c;
    c.experiment = "decay";
    c.mesh_cells = {32, 16};
    c.subdomains = {4, 2};
    c.contrasts = {1.0, 250.0, 1e6};
    c.tol = 3e-7;
    c.subdomain_ids = {0, 5};
    c.coeff_file = "some/field.txt";
    fs::path p = fs::temp_directory_path() / "msgfem_cfg_roundtrip.txt";
    { std::ofstream out(p); out << c.serialize(); }
    RunConfig d = RunConfig::from_file(p.string());
    REQUIRE(d.serialize() == c.serialize());
    REQUIRE(d.contrasts == std::vector<double>{1.0, 250.0, 1e6});
    REQUIRE(d.tol == 3e-7);
  }
  SECTION("comments and blank lines are ignored") {
    fs::path p = fs::temp_directory_path() / "msgfem_cfg_comments.txt";
    { std::ofstream out(p);
      out << "# header comment\n\n n = 7   # trailing\n\tmaxit = 20\n"; }
    RunConfig c = RunConfig::from_file(p.string());
    REQUIRE(c.n == 7);
    REQUIRE(c.maxit == 20);
    REQUIRE(c.tol == 1e-8);  // untouched default
  }
  SECTION("unknown keys and bad lines are rejected") {
    RunConfig c;
    REQUIRE_THROWS_WITH(c.set("no_such_key", "1"),
                        Catch::Matchers::ContainsSubstring("unknown key"));
    fs::path p = fs::temp_directory_path() / "msgfem_cfg_bad.txt";
    { std::ofstream out(p); out << "this is not a key value pair\n"; }
    REQUIRE_THROWS_WITH(RunConfig::from_file(p.string()),
                        Catch::Matchers::ContainsSubstring("bad line"));
  }
}

TEST_CASE("gap-separated mode counting") {
  auto vec = [](std::initializer_list<double> v) {
    Eigen::VectorXd x((Index)v.size());
    Index i = 0;
    for (double t : v) x[i++] = t;
    return x;
  };
  // Two tiny eigenvalues separated from the rest by more than a factor 100.
  REQUIRE(count_large_modes(vec({1e-6, 2e-6, 1.0, 2.0})) == 2);
  // A zero (kernel) eigenvalue is not counted as a mode.
  REQUIRE(count_large_modes(vec({0.0, 1e-6, 1.0, 2.0})) == 1);
  // No gap anywhere: no distinguished leading cluster.
  REQUIRE(count_large_modes(vec({1.0, 2.0, 4.0, 8.0})) == 0);
  // Gap position respects the threshold argument.
  REQUIRE(count_large_modes(vec({1e-2, 1.0, 2.0}), 50.0) == 1);
  REQUIRE(count_large_modes(vec({1e-2, 1.0, 2.0}), 200.0) == 0);
}

TEST_CASE("solve experiment") {
  RunConfig c = small_solve_config("solve_a");
  RunResult r = run_experiment(c);

  SECTION("writes manifest, solutions and decomposition summary") {
    REQUIRE(fs::exists(r.out_dir / "run.json"));
    REQUIRE(fs::exists(r.out_dir / "u_p.csv"));
    REQUIRE(fs::exists(r.out_dir / "u_G_full.csv"));
    REQUIRE(fs::exists(r.out_dir / "u_G_ring.csv"));
    REQUIRE(r.manifest["full"]["relative_energy_error"].get<double>() < 1.0);
    REQUIRE(r.manifest["ring"]["coarse_dim"].get<int>() > 0);
    REQUIRE(r.manifest["decomposition"]["subdomains"].size() == 4);
    REQUIRE(r.manifest["config"]["mesh"] == "24 24");
  }
  SECTION("reruns are byte-identical") {
    RunConfig c2 = c;
    c2.out = scratch_dir("solve_b").string();
    RunResult r2 = run_experiment(c2);
    REQUIRE(slurp(r.out_dir / "u_G_full.csv") ==
            slurp(r2.out_dir / "u_G_full.csv"));
    REQUIRE(slurp(r.out_dir / "u_G_ring.csv") ==
            slurp(r2.out_dir / "u_G_ring.csv"));
    REQUIRE(slurp(r.out_dir / "u_p.csv") == slurp(r2.out_dir / "u_p.csv"));
  }
  SECTION("parallel eigensolves give the same result as serial") {
    RunConfig c2 = c;
    c2.jobs = 4;
    c2.out = scratch_dir("solve_jobs").string();
    RunResult r2 = run_experiment(c2);
    REQUIRE(slurp(r.out_dir / "u_G_full.csv") ==
            slurp(r2.out_dir / "u_G_full.csv"));
  }
}

TEST_CASE("decay experiment") {
  RunConfig c = small_solve_config("decay");
  c.experiment = "decay";
  c.n_min = 1;
  c.n_max = 3;
  c.ells = {1, 2};
  RunResult r = run_experiment(c);
  std::string csv = slurp(r.out_dir / "decay.csv");
  std::istringstream in(csv);
  std::string header;
  std::getline(in, header);
  REQUIRE(header == "variant,n,ell,coarse_dim,relative_energy_error");
  int rows = 0;
  std::string line;
  std::vector<double> errs;
  while (std::getline(in, line)) {
    ++rows;
    auto last = line.rfind(',');
    errs.push_back(std::stod(line.substr(last + 1)));
  }
  REQUIRE(rows == 2 * 2 * 3);  // ells x variants x n range
  for (double e : errs) {
    REQUIRE(e >= 0.0);
    REQUIRE(e < 10.0);
  }
}

TEST_CASE("spectrum experiment") {
  RunConfig c = small_solve_config("spectrum");
  c.experiment = "spectrum";
  c.nev = 5;
  c.subdomain_ids = {0, 3};
  RunResult r = run_experiment(c);
  std::string csv = slurp(r.out_dir / "spectrum.csv");
  REQUIRE(csv.rfind("subdomain,variant,k,lambda,inv_lambda", 0) == 0);
  // 2 subdomains x 2 variants x 5 eigenvalues
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 2 * 5);
  REQUIRE(r.manifest.contains("large_modes"));
}

TEST_CASE("iterate experiment") {
  RunConfig c = small_solve_config("iterate");
  c.experiment = "iterate";
  c.contrasts = {1.0, 1e3};
  c.n = 3;
  c.variant = "full";
  c.solver = "both";
  c.maxit = 400;
  RunResult r = run_experiment(c);
  for (const char* name : {"iterations_full_richardson.csv",
                           "iterations_full_gmres.csv"}) {
    std::string csv = slurp(r.out_dir / name);
    std::istringstream in(csv);
    std::string header;
    std::getline(in, header);
    REQUIRE(header.rfind("contrast", 0) == 0);
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) ++rows;
    REQUIRE(rows == 2);
  }
}

TEST_CASE("experiment dispatcher rejects unknown names") {
  RunConfig c = small_solve_config("dispatch");
  c.experiment = "frobnicate";
  REQUIRE_THROWS(run_experiment(c));
}
