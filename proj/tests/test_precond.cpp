#include <catch2/catch_amalgamated.hpp>

#include <msgfem/precond.hpp>

using namespace msgfem;

namespace {

struct PrecondFixture {
  Mesh mesh;
  FineProblem prob;
  Decomposition decomp;
  PartitionOfUnity pu;
  std::vector<LocalSpectrum> spectra;
  ParticularSolution part;
  Eigen::VectorXd u_h;
};

PrecondFixture make_fixture(double contrast) {
  PrecondFixture f;
  f.mesh = build_mesh(2, {32, 32});
  CoefficientField coeff = contrast == 1.0
                               ? constant_field(f.mesh)
                               : skyscraper_field(f.mesh, 11, 8, contrast);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::VectorXd fc(f.mesh.cell_count());
  for (Index c = 0; c < fc.size(); ++c) fc[c] = unif(rng);
  f.prob = build_problem(f.mesh, coeff, fc);
  f.decomp = build_decomposition(f.mesh, {4, 4}, 2, 2);
  f.pu = build_partition_of_unity(f.mesh, f.decomp);
  EigOptions opt;
  opt.nev = 8;
  for (int i = 0; i < f.decomp.size(); ++i)
    f.spectra.push_back(
        eigensolve_full(f.mesh, f.prob.coeff, f.decomp, f.pu, i, opt));
  f.part = build_particular(f.prob, f.decomp, f.pu);
  f.u_h = solve_fine(f.prob);
  return f;
}

const PrecondFixture& fixture_hi() {
  static PrecondFixture* f = new PrecondFixture(make_fixture(1e4));
  return *f;
}

const PrecondFixture& fixture_const() {
  static PrecondFixture* f = new PrecondFixture(make_fixture(1.0));
  return *f;
}

CoarseSpace coarse_of(const PrecondFixture& f, int n) {
  std::vector<int> nv(f.decomp.size(), n);
  return build_coarse_space(f.prob, f.decomp, f.pu, f.spectra, nv);
}

}  // namespace

TEST_CASE("single-subdomain preconditioner is an exact solver") {
  Mesh mesh = build_mesh(2, {12, 12});
  FineProblem prob = build_problem(mesh, constant_field(mesh),
                                   Eigen::VectorXd::Ones(mesh.cell_count()));
  Decomposition d = build_decomposition(mesh, {1, 1}, 2, 2);
  PartitionOfUnity pu = build_partition_of_unity(mesh, d);
  // A single oversampled subdomain covers the whole domain, so the local
  // harmonic space is trivial; use an empty coarse space.
  std::vector<LocalSpectrum> sp(1);
  CoarseSpace cs = build_coarse_space(prob, d, pu, sp, {0});
  TwoLevelPreconditioner B(prob, d, pu, cs);
  // With one subdomain covering everything, the one-level part is already
  // the exact inverse of the interior matrix.
  Eigen::VectorXd z = B.level_one(prob.f0);
  Eigen::VectorXd u = solve_fine(prob);
  REQUIRE((z - prob.restrict_interior(u)).norm() < 1e-10 * z.norm());
  SolveReport rep = richardson(prob, B, 1e-10, 5);
  REQUIRE(rep.converged);
  REQUIRE(rep.iterations == 1);
}

TEST_CASE("first Richardson iterate from zero is the multiscale solution") {
  const PrecondFixture& f = fixture_hi();
  for (int n : {3, 6}) {
    CoarseSpace cs = coarse_of(f, n);
    TwoLevelPreconditioner B(f.prob, f.decomp, f.pu, cs);
    GfemSolution g = coarse_solve(f.prob, cs, f.part.u_p);
    Eigen::VectorXd first = B.apply(f.prob.f0);  // one step from u = 0
    Eigen::VectorXd uG0 = f.prob.restrict_interior(g.u_G);
    REQUIRE((first - uG0).norm() < 1e-9 * uG0.norm());
  }
}

TEST_CASE("preconditioned operator fixes the coarse space") {
  const PrecondFixture& f = fixture_hi();
  CoarseSpace cs = coarse_of(f, 4);
  TwoLevelPreconditioner B(f.prob, f.decomp, f.pu, cs);
  Index n0 = f.prob.dofs.n_interior();
  Eigen::MatrixXd BK(n0, n0);
  for (Index j = 0; j < n0; ++j)
    BK.col(j) = B.apply(f.prob.K0.col(j));
  Eigen::EigenSolver<Eigen::MatrixXd> es(BK);
  int at_one = 0;
  for (Index j = 0; j < n0; ++j)
    if (std::abs(es.eigenvalues()[j] - std::complex<double>(1.0, 0.0)) < 1e-8)
      ++at_one;
  // I - BK has rank at most n0 - dim(S), so BK has eigenvalue one with
  // multiplicity at least the coarse dimension.
  REQUIRE(at_one >= cs.dim());
}

TEST_CASE("Richardson iteration") {
  const PrecondFixture& f = fixture_hi();
  CoarseSpace cs = coarse_of(f, 6);
  TwoLevelPreconditioner B(f.prob, f.decomp, f.pu, cs);

  SECTION("converges to the fine solution") {
    SolveReport rep = richardson(f.prob, B, 1e-10, 200);
    REQUIRE(rep.converged);
    REQUIRE(rep.iterations < 200);
    Eigen::VectorXd u0 = f.prob.restrict_interior(f.u_h);
    REQUIRE((rep.solution - u0).norm() < 1e-7 * u0.norm());
  }
  SECTION("error follows the stationary recurrence") {
    Eigen::VectorXd u_ref0 = f.prob.restrict_interior(f.u_h);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> gauss;
    Eigen::VectorXd u0(u_ref0.size());
    for (Index i = 0; i < u0.size(); ++i) u0[i] = gauss(rng);
    SolveReport rep = richardson(f.prob, B, 0.0, 3, &u0, &u_ref0);
    // Recompute the step by hand: e <- (I - B K0) e.
    Eigen::VectorXd e = u_ref0 - u0;
    for (int j = 1; j <= 3; ++j) {
      e -= B.apply(Eigen::VectorXd(f.prob.K0 * e));
      REQUIRE(rep.energy_errors[j] ==
              Catch::Approx(energy_norm(f.prob.K0, e)).epsilon(1e-9));
    }
    REQUIRE(rep.contraction_factors.size() == 3);
  }
  SECTION("reports the iteration-count sentinel when the budget runs out") {
    SolveReport rep = richardson(f.prob, B, 1e-14, 2);
    REQUIRE_FALSE(rep.converged);
    REQUIRE(rep.iterations == kIterInfinity);
  }
}

TEST_CASE("GMRES") {
  const PrecondFixture& f = fixture_hi();
  CoarseSpace cs = coarse_of(f, 6);
  TwoLevelPreconditioner B(f.prob, f.decomp, f.pu, cs);

  SECTION("converges to the fine solution") {
    SolveReport rep = gmres(f.prob, B, 1e-10, 200);
    REQUIRE(rep.converged);
    Eigen::VectorXd u0 = f.prob.restrict_interior(f.u_h);
    REQUIRE((rep.solution - u0).norm() < 1e-7 * u0.norm());
  }
  SECTION("never trails Richardson at the same iteration") {
    SolveReport rich = richardson(f.prob, B, 1e-10, 100);
    SolveReport gm = gmres(f.prob, B, 1e-10, 100);
    REQUIRE(gm.iterations <= rich.iterations);
    size_t m = std::min(gm.residuals.size(), rich.residuals.size());
    for (size_t k = 0; k < m; ++k)
      REQUIRE(gm.residuals[k] <=
              rich.residuals[k] * (1.0 + 1e-10) + 1e-12 * rich.residuals[0]);
  }
}

TEST_CASE("contraction factor stays within the one-shot error bound") {
  const PrecondFixture& f = fixture_const();
  CoarseSpace cs = coarse_of(f, 6);
  TwoLevelPreconditioner B(f.prob, f.decomp, f.pu, cs);
  GfemSolution g = coarse_solve(f.prob, cs, f.part.u_p);
  ContractionReport rep = contraction_check(f.prob, B, g.u_G);
  REQUIRE(rep.theta_bound < 1.0);
  REQUIRE(rep.within_bound);
  REQUIRE(rep.theta_measured < 1.0);
}
