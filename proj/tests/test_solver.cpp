#include <hodgefem/solver.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

using namespace hodgefem;

TEST_CASE("mixed solve matches a dense factorization oracle") {
  SurfaceMesh mesh = uniform_refine(build_initial("sphere", "icosahedron"), 1);
  ImplicitSurface sphere = ImplicitSurface::sphere();
  ManufacturedSolution ms = manufactured_solution("y1");
  MixedSystem sys = assemble_mixed(mesh, sphere, ms.f_density, quadrature_rule(4));

  Eigen::MatrixXd K = Eigen::MatrixXd(sys.K);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  REQUIRE(lu.isInvertible());
  Eigen::VectorXd x = lu.solve(sys.rhs);

  MixedSolution sol = solve_mixed(sys, 1e-12);
  double scale = x.cwiseAbs().maxCoeff();
  REQUIRE((sol.sigma.coefficients - x.head(sys.n1)).cwiseAbs().maxCoeff() <
          1e-8 * scale);
  REQUIRE((sol.u.coefficients - x.segment(sys.n1, sys.n2)).cwiseAbs().maxCoeff() <
          1e-8 * scale);
  REQUIRE(std::abs(sol.p_const - x[sys.n1 + sys.n2]) < 1e-8 * scale);
  REQUIRE(sol.residual_norm <= 1e-12 * sys.rhs.norm());
  REQUIRE(sol.stats.unknowns == sys.n1 + sys.n2 + 1);
  REQUIRE(sol.sigma.mesh_signature == mesh.root_signature);
}

TEST_CASE("zero data gives the zero solution") {
  SurfaceMesh mesh = build_initial("sphere", "icosahedron");
  ImplicitSurface sphere = ImplicitSurface::sphere();
  MixedSystem sys = assemble_mixed(
      mesh, sphere, [](const Vec3&) { return 0.0; }, quadrature_rule(4));
  MixedSolution sol = solve_mixed(sys, 1e-12);
  REQUIRE(sol.sigma.coefficients.norm() < 1e-14);
  REQUIRE(sol.u.coefficients.norm() < 1e-14);
  REQUIRE(std::abs(sol.p_const) < 1e-14);
}

TEST_CASE("manufactured y1 converges under refinement") {
  ImplicitSurface sphere = ImplicitSurface::sphere();
  ManufacturedSolution ms = manufactured_solution("y1");
  QuadratureRule quad = quadrature_rule(4);
  double prev = -1;
  for (int rounds : {2, 4}) {
    SurfaceMesh mesh =
        uniform_refine(build_initial("sphere", "icosahedron"), rounds);
    MixedSystem sys = assemble_mixed(mesh, sphere, ms.f_density, quad);
    MixedSolution sol = solve_mixed(sys, 1e-10);
    double err = reference_error(mesh, sphere, sol.sigma, ms.sigma_field,
                                 quadrature_rule(6));
    if (prev > 0) REQUIRE(err < 0.6 * prev);
    prev = err;
  }
  REQUIRE(prev < 0.5);
}

TEST_CASE("the pipeline is linear in the data") {
  SurfaceMesh mesh = uniform_refine(build_initial("sphere", "icosahedron"), 1);
  ImplicitSurface sphere = ImplicitSurface::sphere();
  QuadratureRule quad = quadrature_rule(4);
  MixedSolution a = solve_mixed(
      assemble_mixed(mesh, sphere, manufactured_solution("y1").f_density, quad),
      1e-12);
  MixedSolution b = solve_mixed(
      assemble_mixed(mesh, sphere,
                     manufactured_solution("y1:scale=0.25").f_density, quad),
      1e-12);
  REQUIRE((b.sigma.coefficients - 0.25 * a.sigma.coefficients)
              .cwiseAbs()
              .maxCoeff() < 1e-10);
  REQUIRE((b.u.coefficients - 0.25 * a.u.coefficients).cwiseAbs().maxCoeff() <
          1e-10);
}

TEST_CASE("manufactured case parsing") {
  REQUIRE_THROWS_AS(manufactured_solution("y3"), UnknownCase);
  REQUIRE_THROWS_AS(manufactured_solution("y1:scale=abc"), UnknownCase);
  REQUIRE_THROWS_AS(manufactured_solution("gaussian-bump:radius=1"),
                    UnknownCase);
  ManufacturedSolution bump =
      manufactured_solution("gaussian-bump:width=0.3,cx=1,cy=0,cz=0");
  // sigma is tangent to the sphere for every case
  for (const char* name : {"y1", "y2", "gaussian-bump:width=0.3"}) {
    ManufacturedSolution ms = manufactured_solution(name);
    Vec3 p = Vec3(0.3, -0.5, 0.81).normalized();
    REQUIRE(std::abs(ms.sigma_field(p).dot(p)) < 1e-13);
  }
  Vec3 p = Vec3(0.9, 0.1, -0.4).normalized();
  REQUIRE(std::abs(bump.sigma_field(p).dot(p)) < 1e-13);
}

TEST_CASE("harmonic-form fallback path solves on the torus") {
  SurfaceMesh mesh = build_initial("torus:R=2,r=0.5", "torus-grid:12x8");
  REQUIRE(mesh.euler_characteristic() == 0);
  ImplicitSurface torus = ImplicitSurface::torus(2, 0.5);
  MixedSystem sys = assemble_mixed(
      mesh, torus, [](const Vec3& x) { return x[2]; }, quadrature_rule(4));
  MixedSolution sol = solve_mixed(sys, 1e-10);
  REQUIRE(sol.residual_norm <= 1e-10 * sys.rhs.norm());
  REQUIRE(std::isfinite(sol.sigma.coefficients.norm()));
  REQUIRE(sol.u.coefficients.norm() > 0);
}

TEST_CASE("an unreachable tolerance raises a solve failure") {
  SurfaceMesh mesh = build_initial("sphere", "icosahedron");
  ImplicitSurface sphere = ImplicitSurface::sphere();
  MixedSystem sys = assemble_mixed(
      mesh, sphere, manufactured_solution("y1").f_density, quadrature_rule(4));
  MixedFactorization fac(sys);
  REQUIRE_THROWS_AS(fac.solve(sys.F, 0.0), SolveFailure);
}

TEST_CASE("discrete data must match the mesh") {
  SurfaceMesh mesh = build_initial("sphere", "icosahedron");
  ImplicitSurface sphere = ImplicitSurface::sphere();
  FormVector wrong;
  wrong.degree = 2;
  wrong.coefficients = Eigen::VectorXd::Ones(7);
  REQUIRE_THROWS_AS(assemble_mixed(mesh, sphere, wrong, quadrature_rule(4)),
                    NotNested);
}
