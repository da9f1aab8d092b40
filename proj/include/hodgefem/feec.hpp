#ifndef HODGEFEM_FEEC_HPP
#define HODGEFEM_FEEC_HPP

#include "hodgefem/core.hpp"
#include "hodgefem/geometry.hpp"
#include "hodgefem/mesh.hpp"

#include <map>
#include <vector>

namespace hodgefem {

/// Coefficient vector of a discrete form.
///  k = 1: edge integrals of a Whitney 1-form (dofs follow DofMap edges).
///  k = 2: piecewise-constant top-form density relative to the flat area
///         form of each triangle.
struct FormVector {
  int degree = 0;
  Eigen::VectorXd coefficients;
  std::int64_t mesh_signature = 0; // root signature of the carrying mesh
};

/// Global edge/triangle dof enumeration with orientation signs.
/// Edges are globally oriented low vertex id -> high vertex id; the sign of
/// edge e in triangle t is +1 iff that matches t's induced boundary direction.
struct DofMap {
  const SurfaceMesh* mesh = nullptr;
  std::map<std::array<int, 2>, int> edge_index;
  std::vector<std::array<int, 3>> tri_edges;  // global edge ids per local edge
  std::vector<std::array<int, 3>> tri_signs;  // +1 / -1

  explicit DofMap(const SurfaceMesh& m) : mesh(&m) {
    for (int e = 0; e < m.n_edges(); ++e) edge_index[m.edges[e]] = e;
    tri_edges.resize(m.n_tris());
    tri_signs.resize(m.n_tris());
    for (int t = 0; t < m.n_tris(); ++t) {
      for (int i = 0; i < 3; ++i) {
        int a = m.tris[t][i], b = m.tris[t][(i + 1) % 3];
        tri_edges[t][i] = edge_index.at({std::min(a, b), std::max(a, b)});
        tri_signs[t][i] = a < b ? 1 : -1;
      }
    }
  }

  int n1() const { return mesh->n_edges(); }
  int n2() const { return mesh->n_tris(); }
};

/// Incidence matrix of d: edge dofs -> triangle dofs, entries +-1.
/// The density of d(sigma) on triangle t is (D s)_t / area(t).
inline SpMat exterior_derivative_matrix(const SurfaceMesh& mesh,
                                        const DofMap& dofs) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(3 * mesh.n_tris());
  for (int t = 0; t < mesh.n_tris(); ++t)
    for (int i = 0; i < 3; ++i)
      trips.emplace_back(t, dofs.tri_edges[t][i],
                         static_cast<double>(dofs.tri_signs[t][i]));
  SpMat D(dofs.n2(), dofs.n1());
  D.setFromTriplets(trips.begin(), trips.end());
  return D;
}

/// Vertex-to-edge incidence (gradient); D * G = 0 exactly.
inline SpMat vertex_incidence_matrix(const SurfaceMesh& mesh) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * mesh.n_edges());
  for (int e = 0; e < mesh.n_edges(); ++e) {
    trips.emplace_back(e, mesh.edges[e][0], -1.0);
    trips.emplace_back(e, mesh.edges[e][1], 1.0);
  }
  SpMat G(mesh.n_edges(), mesh.n_vertices());
  G.setFromTriplets(trips.begin(), trips.end());
  return G;
}

namespace detail {

/// Per-element Whitney 1-form data in the triangle-plane basis.
struct WhitneyElement {
  TriangleFrame frame;
  std::array<Vec2, 3> grad_lambda; // in-plane barycentric gradients
  std::array<int, 3> edge_ids;
  std::array<double, 3> signs;

  WhitneyElement(const SurfaceMesh& mesh, const DofMap& dofs, int t)
      : frame(mesh.point(t, 0), mesh.point(t, 1), mesh.point(t, 2)) {
    std::array<Vec2, 3> p;
    for (int i = 0; i < 3; ++i) p[i] = frame.to_plane(mesh.point(t, i) - frame.origin);
    double twice_area = 2.0 * frame.area;
    for (int i = 0; i < 3; ++i) {
      Vec2 opp = p[(i + 2) % 3] - p[(i + 1) % 3]; // edge opposite vertex i
      // rotate by 90 degrees and normalize so grad(lambda_i) . (p_i - p_j) = 1
      Vec2 g(-opp[1], opp[0]);
      g /= twice_area;
      if (g.dot(p[i] - p[(i + 1) % 3]) < 0) g = -g;
      grad_lambda[i] = g;
    }
    for (int i = 0; i < 3; ++i) {
      edge_ids[i] = dofs.tri_edges[t][i];
      signs[i] = dofs.tri_signs[t][i];
    }
  }

  /// Whitney basis covector of local edge i = (v_i, v_{i+1}) at barycentric b,
  /// oriented along the GLOBAL edge direction.
  Vec2 basis(int i, const Vec3& bary) const {
    int a = i, b = (i + 1) % 3;
    Vec2 w = bary[a] * grad_lambda[b] - bary[b] * grad_lambda[a];
    return signs[i] * w;
  }

  /// Value of the Whitney combination with global coefficients s.
  Vec2 field(const Eigen::VectorXd& s, const Vec3& bary) const {
    Vec2 w = Vec2::Zero();
    for (int i = 0; i < 3; ++i) w += s[edge_ids[i]] * basis(i, bary);
    return w;
  }
};

inline Vec3 bary_point(const TriangleFrame&, const SurfaceMesh& mesh, int t,
                       const Vec3& bary) {
  return bary[0] * mesh.point(t, 0) + bary[1] * mesh.point(t, 1) +
         bary[2] * mesh.point(t, 2);
}

} // namespace detail

/// Mass matrix of mapped discrete k-forms in the L2(M) inner product,
/// assembled by quadrature on the flat triangles: 1-forms contract with
/// G^{-1}, top-form densities scale with 1/(alpha1*alpha2), both weighted by
/// the area factor.
inline SpMat mass_matrix(const SurfaceMesh& mesh, const ImplicitSurface& surface,
                         int k, const QuadratureRule& quad) {
  const int nq = static_cast<int>(quad.points.size());
  if (k == 2) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(mesh.n_tris());
    for (int t = 0; t < mesh.n_tris(); ++t) {
      TriangleFrame frame = mesh.frame(t);
      double acc = 0.0;
      for (int q = 0; q < nq; ++q) {
        Vec3 x = detail::bary_point(frame, mesh, t, quad.points[q]);
        TangentSample ts = tangent_map(surface, frame, x);
        acc += quad.weights[q] * (1.0 / ts.area_factor);
      }
      trips.emplace_back(t, t, 2.0 * frame.area * acc);
    }
    SpMat M(mesh.n_tris(), mesh.n_tris());
    M.setFromTriplets(trips.begin(), trips.end());
    return M;
  }
  if (k != 1) throw std::invalid_argument("mass_matrix supports k in {1,2}");
  DofMap dofs(mesh);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(9 * mesh.n_tris());
  for (int t = 0; t < mesh.n_tris(); ++t) {
    detail::WhitneyElement el(mesh, dofs, t);
    Eigen::Matrix3d local = Eigen::Matrix3d::Zero();
    for (int q = 0; q < nq; ++q) {
      Vec3 x = detail::bary_point(el.frame, mesh, t, quad.points[q]);
      TangentSample ts = tangent_map(surface, el.frame, x);
      Mat2 Ginv = ts.metric.inverse();
      double w = quad.weights[q] * ts.area_factor * 2.0 * el.frame.area;
      std::array<Vec2, 3> wv;
      for (int i = 0; i < 3; ++i) wv[i] = el.basis(i, quad.points[q]);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          local(i, j) += w * wv[i].dot(Ginv * wv[j]);
    }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        trips.emplace_back(el.edge_ids[i], el.edge_ids[j], local(i, j));
  }
  SpMat M(dofs.n1(), dofs.n1());
  M.setFromTriplets(trips.begin(), trips.end());
  return M;
}

/// Diagonal flat-metric mass matrix of top-form densities on M_A.
inline SpMat flat_top_mass(const SurfaceMesh& mesh) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(mesh.n_tris());
  for (int t = 0; t < mesh.n_tris(); ++t) trips.emplace_back(t, t, mesh.area(t));
  SpMat M(mesh.n_tris(), mesh.n_tris());
  M.setFromTriplets(trips.begin(), trips.end());
  return M;
}

/// Canonical projection I_h of a top-form density on M_A: the elementwise
/// flat mean, so that coefficient * area = element integral.
inline FormVector canonical_projection_top(const SurfaceMesh& mesh,
                                           const ScalarField& density_on_MA,
                                           const QuadratureRule& quad) {
  FormVector out;
  out.degree = 2;
  out.mesh_signature = mesh.root_signature;
  out.coefficients.resize(mesh.n_tris());
  for (int t = 0; t < mesh.n_tris(); ++t) {
    TriangleFrame frame = mesh.frame(t);
    double acc = 0.0;
    for (std::size_t q = 0; q < quad.points.size(); ++q)
      acc += quad.weights[q] *
             density_on_MA(detail::bary_point(frame, mesh, t, quad.points[q]));
    out.coefficients[t] = 2.0 * acc; // divide by area after scaling by 2A
  }
  return out;
}

/// Canonical projection of fine-mesh discrete data onto a coarse ancestor:
/// per coarse element the area-weighted mean of the child constants. This is
/// exact, Lemma-PL1 holds by construction.
inline FormVector canonical_projection_top(const SurfaceMesh& coarse,
                                           const SurfaceMesh& fine,
                                           const FormVector& fine_data) {
  std::vector<int> parent_map;
  if (!is_refinement_of(fine, coarse, &parent_map))
    throw NotNested("canonical projection needs nested meshes");
  FormVector out;
  out.degree = 2;
  out.mesh_signature = coarse.root_signature;
  out.coefficients = Eigen::VectorXd::Zero(coarse.n_tris());
  Eigen::VectorXd area_acc = Eigen::VectorXd::Zero(coarse.n_tris());
  for (int t = 0; t < fine.n_tris(); ++t) {
    double a = fine.area(t);
    out.coefficients[parent_map[t]] += a * fine_data.coefficients[t];
    area_acc[parent_map[t]] += a;
  }
  out.coefficients.array() /= area_acc.array();
  return out;
}

/// Canonical edge dofs of a smooth 1-form on M_A (given as an ambient
/// covector field): integral of the tangential trace along each edge.
inline FormVector canonical_projection_edge(const SurfaceMesh& mesh,
                                            const VectorField& omega,
                                            int gauss_points = 4) {
  EdgeRule rule = edge_gauss(gauss_points);
  FormVector out;
  out.degree = 1;
  out.mesh_signature = mesh.root_signature;
  out.coefficients.resize(mesh.n_edges());
  for (int e = 0; e < mesh.n_edges(); ++e) {
    Vec3 a = mesh.vertices[mesh.edges[e][0]];
    Vec3 b = mesh.vertices[mesh.edges[e][1]];
    double acc = 0.0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      Vec3 x = a + rule.nodes[q] * (b - a);
      acc += rule.weights[q] * omega(x).dot(b - a);
    }
    out.coefficients[e] = acc;
  }
  return out;
}

/// Load vector F_t = <f, i_A basis_t>_M = integral over T of f(a(x)) dA.
inline Eigen::VectorXd load_vector(const SurfaceMesh& mesh,
                                   const ImplicitSurface& surface,
                                   const ScalarField& f_density_on_M,
                                   const QuadratureRule& quad) {
  Eigen::VectorXd F(mesh.n_tris());
  for (int t = 0; t < mesh.n_tris(); ++t) {
    TriangleFrame frame = mesh.frame(t);
    double acc = 0.0;
    for (std::size_t q = 0; q < quad.points.size(); ++q) {
      Vec3 x = detail::bary_point(frame, mesh, t, quad.points[q]);
      TangentSample ts = tangent_map(surface, frame, x);
      acc += quad.weights[q] * f_density_on_M(ts.projected_point);
    }
    F[t] = 2.0 * frame.area * acc;
  }
  return F;
}

/// L2(M) projection of a density f on M onto mapped piecewise constants:
/// the minimizer of ||i_A v - f||_{L2(M)}, i.e. coefficients M2^{-1} F.
inline FormVector l2_projection_top(const SurfaceMesh& mesh,
                                    const ImplicitSurface& surface,
                                    const ScalarField& f_density_on_M,
                                    const QuadratureRule& quad) {
  Eigen::VectorXd F = load_vector(mesh, surface, f_density_on_M, quad);
  SpMat M2 = mass_matrix(mesh, surface, 2, quad);
  FormVector out;
  out.degree = 2;
  out.mesh_signature = mesh.root_signature;
  out.coefficients = F.cwiseQuotient(Eigen::VectorXd(M2.diagonal()));
  return out;
}

/// Restriction of a coarse piecewise-constant density to a nested fine mesh:
/// children inherit the parent constant exactly.
inline FormVector prolong_topform(const FormVector& coarse_data,
                                  const SurfaceMesh& fine,
                                  const std::vector<int>& parent_map) {
  FormVector out;
  out.degree = 2;
  out.mesh_signature = fine.root_signature;
  out.coefficients.resize(fine.n_tris());
  for (int t = 0; t < fine.n_tris(); ++t)
    out.coefficients[t] = coarse_data.coefficients[parent_map[t]];
  return out;
}

/// Prolong Whitney edge dofs from a coarse mesh onto a nested fine mesh.
/// The coarse field is linear on each parent triangle, so the fine edge dof
/// is the midpoint value contracted with the edge vector (exact).
inline FormVector prolong_edgeform(const SurfaceMesh& coarse,
                                   const FormVector& coarse_sigma,
                                   const SurfaceMesh& fine,
                                   const std::vector<int>& parent_map) {
  DofMap coarse_dofs(const_cast<const SurfaceMesh&>(coarse));
  std::vector<detail::WhitneyElement> elements;
  elements.reserve(coarse.n_tris());
  for (int t = 0; t < coarse.n_tris(); ++t)
    elements.emplace_back(coarse, coarse_dofs, t);

  FormVector out;
  out.degree = 1;
  out.mesh_signature = fine.root_signature;
  out.coefficients.resize(fine.n_edges());
  for (int e = 0; e < fine.n_edges(); ++e) {
    int t_fine = fine.edge_tris[e][0];
    int t_coarse = parent_map[t_fine];
    const auto& el = elements[t_coarse];
    Vec3 a = fine.vertices[fine.edges[e][0]];
    Vec3 b = fine.vertices[fine.edges[e][1]];
    Vec3 mid = 0.5 * (a + b);
    // barycentric coordinates of mid within the coarse triangle
    Vec2 local = el.frame.to_plane(mid - el.frame.origin);
    Vec2 p1 = el.frame.to_plane(coarse.point(t_coarse, 1) - el.frame.origin);
    Vec2 p2 = el.frame.to_plane(coarse.point(t_coarse, 2) - el.frame.origin);
    Mat2 A;
    A.col(0) = p1;
    A.col(1) = p2;
    Vec2 lm = A.inverse() * local;
    Vec3 bary(1.0 - lm[0] - lm[1], lm[0], lm[1]);
    Vec2 w = el.field(coarse_sigma.coefficients, bary);
    out.coefficients[e] = el.frame.from_plane(w).dot(b - a);
  }
  return out;
}

/// Harmonic (constant-volume-form) component of a density on M:
/// c = (integral of f over M) / |M|, residual = f - c.
struct HarmonicSplit {
  double constant = 0.0;
  ScalarField residual; // density on M
};

inline HarmonicSplit harmonic_component_top(const SurfaceMesh& mesh,
                                            const ImplicitSurface& surface,
                                            const ScalarField& f_density_on_M,
                                            const QuadratureRule& quad) {
  double total = 0.0, area = 0.0;
  for (int t = 0; t < mesh.n_tris(); ++t) {
    TriangleFrame frame = mesh.frame(t);
    for (std::size_t q = 0; q < quad.points.size(); ++q) {
      Vec3 x = detail::bary_point(frame, mesh, t, quad.points[q]);
      TangentSample ts = tangent_map(surface, frame, x);
      double w = 2.0 * frame.area * quad.weights[q] * ts.area_factor;
      total += w * f_density_on_M(ts.projected_point);
      area += w;
    }
  }
  HarmonicSplit split;
  split.constant = total / area;
  double c = split.constant;
  ScalarField f = f_density_on_M;
  split.residual = [f, c](const Vec3& x) { return f(x) - c; };
  return split;
}

/// Discrete variant: c = (hb^T M2 y) / (hb^T M2 hb) with hb = all-ones.
inline double harmonic_component_top(const SpMat& M2,
                                     const Eigen::VectorXd& coefficients) {
  Eigen::VectorXd d = M2.diagonal();
  return d.dot(coefficients) / d.sum();
}

} // namespace hodgefem

#endif
