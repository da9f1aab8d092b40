#include <hodgefem/feec.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/SparseCholesky>
#include <random>

using namespace hodgefem;

namespace {

// open two-triangle patch of the unit square in the z = 0 plane
SurfaceMesh unit_square_patch() {
  SurfaceMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)};
  m.tris = {{0, 1, 2}, {1, 3, 2}};
  m.generation = {0, 0};
  m.uid = {0, 1};
  m.child_index = {0, 0};
  m.genealogy = {-1, -1};
  m.build_edges();
  return m;
}

// independent planar Whitney mass oracle: barycentric gradients from a 2x2
// solve, edge-midpoint rule (exact for quadratics)
Eigen::MatrixXd planar_whitney_mass(const SurfaceMesh& m) {
  DofMap dofs(m);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m.n_edges(), m.n_edges());
  for (int t = 0; t < m.n_tris(); ++t) {
    Eigen::Vector2d p[3];
    for (int i = 0; i < 3; ++i)
      p[i] = Eigen::Vector2d(m.point(t, i)[0], m.point(t, i)[1]);
    Eigen::Matrix2d T;
    T.col(0) = p[1] - p[0];
    T.col(1) = p[2] - p[0];
    double area = 0.5 * std::abs(T.determinant());
    // grad lambda: rows of T^{-1} give grad lambda_1, grad lambda_2
    Eigen::Matrix2d Tinv = T.inverse();
    Eigen::Vector2d g[3];
    g[1] = Tinv.row(0);
    g[2] = Tinv.row(1);
    g[0] = -g[1] - g[2];
    auto whitney = [&](int i, const Eigen::Vector3d& lam) {
      int a = i, b = (i + 1) % 3;
      Eigen::Vector2d w = lam[a] * g[b] - lam[b] * g[a];
      return Eigen::Vector2d(dofs.tri_signs[t][i] * w);
    };
    Eigen::Vector3d mids[3] = {{0.5, 0.5, 0}, {0, 0.5, 0.5}, {0.5, 0, 0.5}};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double acc = 0;
        for (const auto& lam : mids)
          acc += whitney(i, lam).dot(whitney(j, lam));
        M(dofs.tri_edges[t][i], dofs.tri_edges[t][j]) += area / 3.0 * acc;
      }
  }
  return M;
}

} // namespace

TEST_CASE("discrete de Rham: d of a gradient vanishes exactly") {
  for (const char* preset : {"icosahedron", "torus-grid:6x6"}) {
    SurfaceMesh mesh = build_initial("sphere", preset);
    DofMap dofs(mesh);
    SpMat D = exterior_derivative_matrix(mesh, dofs);
    SpMat G = vertex_incidence_matrix(mesh);
    SpMat DG = D * G;
    REQUIRE(Eigen::MatrixXd(DG).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("edge projection of an exact gradient is a discrete gradient") {
  SurfaceMesh mesh = uniform_refine(build_initial("sphere", "icosahedron"), 1);
  auto phi = [](const Vec3& p) {
    return p[0] * p[0] * p[1] - 2 * p[2] * p[2] * p[2] + p[1];
  };
  VectorField grad_phi = [](const Vec3& p) {
    return Vec3(2 * p[0] * p[1], p[0] * p[0] + 1, -6 * p[2] * p[2]);
  };
  FormVector proj = canonical_projection_edge(mesh, grad_phi);
  Eigen::VectorXd phiv(mesh.n_vertices());
  for (int v = 0; v < mesh.n_vertices(); ++v) phiv[v] = phi(mesh.vertices[v]);
  Eigen::VectorXd expected = vertex_incidence_matrix(mesh) * phiv;
  REQUIRE((proj.coefficients - expected).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("Whitney mass matrix matches the planar oracle") {
  SurfaceMesh m = unit_square_patch();
  ImplicitSurface plane = ImplicitSurface::plane();
  SpMat M1 = mass_matrix(m, plane, 1, quadrature_rule(4));
  Eigen::MatrixXd oracle = planar_whitney_mass(m);
  REQUIRE((Eigen::MatrixXd(M1) - oracle).cwiseAbs().maxCoeff() < 1e-14);

  SpMat M2 = mass_matrix(m, plane, 2, quadrature_rule(2));
  REQUIRE(std::abs(M2.coeff(0, 0) - 0.5) < 1e-14);
  REQUIRE(std::abs(M2.coeff(1, 1) - 0.5) < 1e-14);
}

TEST_CASE("mass matrices are symmetric positive definite on the sphere") {
  SurfaceMesh mesh = uniform_refine(build_initial("sphere", "icosahedron"), 2);
  ImplicitSurface sphere = ImplicitSurface::sphere();
  QuadratureRule quad = quadrature_rule(4);
  SpMat M1 = mass_matrix(mesh, sphere, 1, quad);
  SpMat M2 = mass_matrix(mesh, sphere, 2, quad);
  REQUIRE((Eigen::MatrixXd(M1) - Eigen::MatrixXd(M1).transpose())
              .cwiseAbs()
              .maxCoeff() < 1e-14);
  Eigen::SimplicialLLT<SpMat> llt1(M1);
  REQUIRE(llt1.info() == Eigen::Success);
  Eigen::SimplicialLLT<SpMat> llt2(M2);
  REQUIRE(llt2.info() == Eigen::Success);
  REQUIRE_THROWS_AS(mass_matrix(mesh, sphere, 3, quad), std::invalid_argument);
}

TEST_CASE("Stokes commutation for polynomial one-forms") {
  SurfaceMesh mesh = uniform_refine(build_initial("sphere", "icosahedron"), 1);
  DofMap dofs(mesh);
  SpMat D = exterior_derivative_matrix(mesh, dofs);
  QuadratureRule quad = quadrature_rule(4);

  struct Case {
    VectorField omega;
    VectorField curl;
  };
  std::vector<Case> cases;
  cases.push_back({[](const Vec3&) { return Vec3(1, -2, 0.5); },
                   [](const Vec3&) { return Vec3(0, 0, 0); }});
  cases.push_back(
      {[](const Vec3& p) { return Vec3(0.3, -1.1, 2.0).cross(p); },
       [](const Vec3&) { return Vec3(2 * 0.3, 2 * -1.1, 2 * 2.0); }});
  cases.push_back({[](const Vec3& p) {
                     return Vec3(p[1] * p[2] * p[2], p[2] * p[0] * p[0],
                                 p[0] * p[1] * p[1]);
                   },
                   [](const Vec3& p) {
                     return Vec3(2 * p[0] * p[1] - p[0] * p[0],
                                 2 * p[1] * p[2] - p[1] * p[1],
                                 2 * p[2] * p[0] - p[2] * p[2]);
                   }});
  for (const auto& c : cases) {
    FormVector proj = canonical_projection_edge(mesh, c.omega);
    Eigen::VectorXd circulation = D * proj.coefficients;
    for (int t = 0; t < mesh.n_tris(); ++t) {
      TriangleFrame frame = mesh.frame(t);
      double face = 0;
      for (std::size_t q = 0; q < quad.points.size(); ++q) {
        Vec3 x = quad.points[q][0] * mesh.point(t, 0) +
                 quad.points[q][1] * mesh.point(t, 1) +
                 quad.points[q][2] * mesh.point(t, 2);
        face += quad.weights[q] * c.curl(x).dot(frame.normal);
      }
      face *= 2.0 * frame.area;
      REQUIRE(std::abs(circulation[t] - face) < 1e-10);
    }
  }
}

TEST_CASE("canonical top projection takes elementwise flat means") {
  SurfaceMesh mesh = build_initial("sphere", "icosahedron");
  QuadratureRule quad = quadrature_rule(4);
  FormVector c = canonical_projection_top(
      mesh, [](const Vec3&) { return 3.25; }, quad);
  REQUIRE((c.coefficients.array() - 3.25).abs().maxCoeff() < 1e-14);
  FormVector lin = canonical_projection_top(
      mesh, [](const Vec3& p) { return p[0] + 2 * p[1] - 0.5 * p[2]; }, quad);
  for (int t = 0; t < mesh.n_tris(); ++t) {
    Vec3 g = mesh.centroid(t);
    REQUIRE(std::abs(lin.coefficients[t] - (g[0] + 2 * g[1] - 0.5 * g[2])) <
            1e-13);
  }
}

TEST_CASE("nested top projection conserves element integrals") {
  SurfaceMesh coarse = build_initial("sphere", "icosahedron");
  SurfaceMesh fine = uniform_refine(bisect(coarse, MarkedSet{2, 9}), 1);
  std::vector<int> parent;
  REQUIRE(is_refinement_of(fine, coarse, &parent));
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  FormVector fine_data;
  fine_data.degree = 2;
  fine_data.coefficients.resize(fine.n_tris());
  for (int t = 0; t < fine.n_tris(); ++t) fine_data.coefficients[t] = u(rng);
  FormVector proj = canonical_projection_top(coarse, fine, fine_data);
  Eigen::VectorXd integral = Eigen::VectorXd::Zero(coarse.n_tris());
  for (int t = 0; t < fine.n_tris(); ++t)
    integral[parent[t]] += fine.area(t) * fine_data.coefficients[t];
  for (int T = 0; T < coarse.n_tris(); ++T)
    REQUIRE(std::abs(proj.coefficients[T] * coarse.area(T) - integral[T]) <
            1e-13);
  REQUIRE_THROWS_AS(canonical_projection_top(fine, coarse, proj), NotNested);
}

TEST_CASE("prolongations are exact for coarse discrete fields") {
  SurfaceMesh coarse = build_initial("sphere", "icosahedron");
  SurfaceMesh fine = uniform_refine(coarse, 2);
  std::vector<int> parent;
  REQUIRE(is_refinement_of(fine, coarse, &parent));
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);

  FormVector ctop;
  ctop.degree = 2;
  ctop.coefficients.resize(coarse.n_tris());
  for (int t = 0; t < coarse.n_tris(); ++t) ctop.coefficients[t] = u(rng);
  FormVector ftop = prolong_topform(ctop, fine, parent);
  for (int t = 0; t < fine.n_tris(); ++t)
    REQUIRE(ftop.coefficients[t] == ctop.coefficients[parent[t]]);

  FormVector csig;
  csig.degree = 1;
  csig.coefficients.resize(coarse.n_edges());
  for (int e = 0; e < coarse.n_edges(); ++e) csig.coefficients[e] = u(rng);
  FormVector fsig = prolong_edgeform(coarse, csig, fine, parent);

  // d commutes with prolongation: child circulation densities equal the
  // parent's
  DofMap cd(coarse), fd(fine);
  Eigen::VectorXd dc = exterior_derivative_matrix(coarse, cd) * csig.coefficients;
  Eigen::VectorXd df = exterior_derivative_matrix(fine, fd) * fsig.coefficients;
  for (int t = 0; t < fine.n_tris(); ++t)
    REQUIRE(std::abs(df[t] / fine.area(t) - dc[parent[t]] / coarse.area(parent[t])) <
            1e-10);

  // fine edges that survive from the coarse mesh keep their dofs
  DofMap coarse_dofs(coarse);
  int preserved = 0;
  for (int e = 0; e < fine.n_edges(); ++e) {
    auto ce = coarse_dofs.edge_index.find(fine.edges[e]);
    if (fine.edges[e][0] < coarse.n_vertices() &&
        fine.edges[e][1] < coarse.n_vertices() &&
        ce != coarse_dofs.edge_index.end()) {
      REQUIRE(std::abs(fsig.coefficients[e] -
                       csig.coefficients[ce->second]) < 1e-12);
      ++preserved;
    }
  }
  (void)preserved;
}

TEST_CASE("L2 projection onto mapped constants minimizes the misfit") {
  SurfaceMesh mesh = uniform_refine(build_initial("sphere", "icosahedron"), 1);
  ImplicitSurface sphere = ImplicitSurface::sphere();
  ScalarField f = [](const Vec3& p) { return p[2] + 2.0; };
  FormVector v = l2_projection_top(mesh, sphere, f, quadrature_rule(4));
  QuadratureRule fine_quad = quadrature_rule(6);
  auto objective = [&](const Eigen::VectorXd& coeff) {
    double acc = 0;
    for (int t = 0; t < mesh.n_tris(); ++t) {
      TriangleFrame frame = mesh.frame(t);
      for (std::size_t q = 0; q < fine_quad.points.size(); ++q) {
        Vec3 x = detail::bary_point(frame, mesh, t, fine_quad.points[q]);
        TangentSample ts = tangent_map(sphere, frame, x);
        double mis = coeff[t] / ts.area_factor - f(ts.projected_point);
        acc += 2.0 * frame.area * fine_quad.weights[q] * mis * mis *
               ts.area_factor;
      }
    }
    return acc;
  };
  double best = objective(v.coefficients);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd pert = v.coefficients;
    for (int t = 0; t < mesh.n_tris(); ++t) pert[t] += u(rng);
    REQUIRE(objective(pert) > best - 1e-12);
  }
}

TEST_CASE("harmonic component of a density") {
  SurfaceMesh mesh = uniform_refine(build_initial("sphere", "icosahedron"), 1);
  ImplicitSurface sphere = ImplicitSurface::sphere();
  QuadratureRule quad = quadrature_rule(4);
  HarmonicSplit split = harmonic_component_top(
      mesh, sphere, [](const Vec3&) { return -1.75; }, quad);
  REQUIRE(std::abs(split.constant + 1.75) < 1e-13);
  REQUIRE(std::abs(split.residual(Vec3(0, 0, 1))) < 1e-13);

  // odd densities integrate to zero on the (symmetric) sphere
  HarmonicSplit odd = harmonic_component_top(
      mesh, sphere, [](const Vec3& p) { return p[2]; }, quad);
  REQUIRE(std::abs(odd.constant) < 1e-12);

  SpMat M2 = mass_matrix(mesh, sphere, 2, quad);
  Eigen::VectorXd ones = Eigen::VectorXd::Constant(mesh.n_tris(), 4.0);
  REQUIRE(std::abs(harmonic_component_top(M2, ones) - 4.0) < 1e-13);
}
