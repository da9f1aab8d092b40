#ifndef HODGEFEM_ESTIMATOR_HPP
#define HODGEFEM_ESTIMATOR_HPP

#include "hodgefem/core.hpp"
#include "hodgefem/feec.hpp"

#include <cmath>
#include <vector>

namespace hodgefem {

/// Per-triangle residual indicators, all in the flat M_A metric:
///   eta_T^2 = h_T ||[[tr * (pi_A sigma)]]||^2_{dT}
///           + h_T^2 ||delta (pi_A sigma)||^2_T
///           + h_T^2 ||pi_A f - d (pi_A sigma)||^2_T
struct IndicatorField {
  std::vector<double> jump_sq;
  std::vector<double> coderiv_sq;
  std::vector<double> residual_sq;
  std::vector<double> eta_sq;
  std::vector<double> osc_sq;
  double total_eta_sq = 0.0;
  double total_osc_sq = 0.0;
  std::int64_t mesh_signature = 0;
};

namespace detail {

/// Edge-normal component of the Whitney field on side t of edge e,
/// evaluated at parameter s along lo->hi; n is the in-plane outward normal.
struct EdgeTrace {
  const SurfaceMesh& mesh;
  const DofMap& dofs;
  std::vector<WhitneyElement> elements;

  EdgeTrace(const SurfaceMesh& m, const DofMap& d) : mesh(m), dofs(d) {
    elements.reserve(m.n_tris());
    for (int t = 0; t < m.n_tris(); ++t) elements.emplace_back(m, d, t);
  }

  Vec3 bary_of(int t, const Vec3& x) const {
    const auto& el = elements[t];
    Vec2 local = el.frame.to_plane(x - el.frame.origin);
    Vec2 p1 = el.frame.to_plane(mesh.point(t, 1) - el.frame.origin);
    Vec2 p2 = el.frame.to_plane(mesh.point(t, 2) - el.frame.origin);
    Mat2 A;
    A.col(0) = p1;
    A.col(1) = p2;
    Vec2 lm = A.inverse() * local;
    return Vec3(1.0 - lm[0] - lm[1], lm[0], lm[1]);
  }

  double normal_component(int t, int e, const Eigen::VectorXd& s,
                          double param) const {
    Vec3 a = mesh.vertices[mesh.edges[e][0]];
    Vec3 b = mesh.vertices[mesh.edges[e][1]];
    Vec3 x = a + param * (b - a);
    const auto& el = elements[t];
    Vec3 w3 = el.frame.from_plane(el.field(s, bary_of(t, x)));
    Vec3 edge_dir = (b - a).normalized();
    Vec3 n_out = edge_dir.cross(el.frame.normal);
    Vec3 away = 0.5 * (a + b) - mesh.centroid(t);
    if (n_out.dot(away) < 0) n_out = -n_out;
    return w3.dot(n_out);
  }
};

} // namespace detail

/// Oscillation of the pulled-back data on this mesh (flat norms):
/// osc^2 = sum_T h_T^2 || pi_A f - mean_T(pi_A f) ||^2_T.
inline void oscillation(const SurfaceMesh& mesh, const ImplicitSurface& surface,
                        const ScalarField& f_density_on_M,
                        const QuadratureRule& quad, std::vector<double>& osc_sq,
                        double& total) {
  osc_sq.assign(mesh.n_tris(), 0.0);
  total = 0.0;
  const int nq = static_cast<int>(quad.points.size());
  for (int t = 0; t < mesh.n_tris(); ++t) {
    TriangleFrame frame = mesh.frame(t);
    std::vector<double> vals(nq);
    double mean = 0.0;
    for (int q = 0; q < nq; ++q) {
      Vec3 x = detail::bary_point(frame, mesh, t, quad.points[q]);
      TangentSample ts = tangent_map(surface, frame, x);
      vals[q] = f_density_on_M(ts.projected_point) * ts.area_factor;
      mean += 2.0 * quad.weights[q] * vals[q];
    }
    double h = element_diameter(mesh, t);
    double acc = 0.0;
    for (int q = 0; q < nq; ++q) {
      double d = vals[q] - mean;
      acc += quad.weights[q] * 2.0 * frame.area * d * d;
    }
    osc_sq[t] = h * h * acc;
    total += osc_sq[t];
  }
}

/// Oscillation of fine-mesh discrete data measured on a coarse ancestor
/// (exact: the integrand is piecewise constant over children).
inline double oscillation_nested(const SurfaceMesh& coarse,
                                 const SurfaceMesh& fine,
                                 const FormVector& fine_data) {
  std::vector<int> parent_map;
  if (!is_refinement_of(fine, coarse, &parent_map))
    throw NotNested("oscillation_nested needs nested meshes");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(coarse.n_tris());
  Eigen::VectorXd area = Eigen::VectorXd::Zero(coarse.n_tris());
  for (int t = 0; t < fine.n_tris(); ++t) {
    double a = fine.area(t);
    mean[parent_map[t]] += a * fine_data.coefficients[t];
    area[parent_map[t]] += a;
  }
  mean.array() /= area.array();
  double total = 0.0;
  for (int t = 0; t < fine.n_tris(); ++t) {
    double d = fine_data.coefficients[t] - mean[parent_map[t]];
    double h = element_diameter(coarse, parent_map[t]);
    total += h * h * fine.area(t) * d * d;
  }
  return total;
}

/// Element indicators for a Whitney field sigma and data f (density on M).
/// f must already be B-reduced by the caller when that is intended.
inline IndicatorField element_indicators(const SurfaceMesh& mesh,
                                         const ImplicitSurface& surface,
                                         const FormVector& sigma,
                                         const ScalarField& f_density_on_M,
                                         const QuadratureRule& quad) {
  const int nt = mesh.n_tris();
  DofMap dofs(mesh);
  detail::EdgeTrace trace(mesh, dofs);
  IndicatorField out;
  out.mesh_signature = mesh.root_signature;
  out.jump_sq.assign(nt, 0.0);
  out.coderiv_sq.assign(nt, 0.0);
  out.residual_sq.assign(nt, 0.0);
  out.eta_sq.assign(nt, 0.0);

  SpMat D = exterior_derivative_matrix(mesh, dofs);
  Eigen::VectorXd ds = D * sigma.coefficients;

  // jump term: 3-point Gauss per interior edge, exact for the quadratic
  // integrand; each edge contributes to both neighbors
  EdgeRule erule = edge_gauss(3);
  for (int e = 0; e < mesh.n_edges(); ++e) {
    int t0 = mesh.edge_tris[e][0], t1 = mesh.edge_tris[e][1];
    double len = (mesh.vertices[mesh.edges[e][1]] -
                  mesh.vertices[mesh.edges[e][0]])
                     .norm();
    double acc = 0.0;
    for (std::size_t q = 0; q < erule.nodes.size(); ++q) {
      double jump = trace.normal_component(t0, e, sigma.coefficients,
                                           erule.nodes[q]) +
                    trace.normal_component(t1, e, sigma.coefficients,
                                           erule.nodes[q]);
      acc += erule.weights[q] * jump * jump;
    }
    double integral = len * acc;
    out.jump_sq[t0] += integral;
    out.jump_sq[t1] += integral;
  }
  for (int t = 0; t < nt; ++t)
    out.jump_sq[t] *= element_diameter(mesh, t);

  // coderivative term: the flat divergence of the Whitney combination,
  // identically zero at lowest order; computed anyway
  for (int t = 0; t < nt; ++t) {
    const auto& el = trace.elements[t];
    double div = 0.0;
    for (int i = 0; i < 3; ++i) {
      int a = i, b = (i + 1) % 3;
      double d = el.grad_lambda[a].dot(el.grad_lambda[b]) -
                 el.grad_lambda[b].dot(el.grad_lambda[a]);
      div += sigma.coefficients[el.edge_ids[i]] * el.signs[i] * d;
    }
    double h = element_diameter(mesh, t);
    out.coderiv_sq[t] = h * h * mesh.area(t) * div * div;
  }

  // residual term: h_T^2 || pi_A f - (D s)_T / area ||^2_T
  const int nq = static_cast<int>(quad.points.size());
  for (int t = 0; t < nt; ++t) {
    TriangleFrame frame = mesh.frame(t);
    double dsd = ds[t] / frame.area; // density of d(sigma)
    double acc = 0.0;
    for (int q = 0; q < nq; ++q) {
      Vec3 x = detail::bary_point(frame, mesh, t, quad.points[q]);
      TangentSample ts = tangent_map(surface, frame, x);
      double r = f_density_on_M(ts.projected_point) * ts.area_factor - dsd;
      acc += quad.weights[q] * 2.0 * frame.area * r * r;
    }
    double h = element_diameter(mesh, t);
    out.residual_sq[t] = h * h * acc;
  }

  for (int t = 0; t < nt; ++t) {
    out.eta_sq[t] = out.jump_sq[t] + out.coderiv_sq[t] + out.residual_sq[t];
    out.total_eta_sq += out.eta_sq[t];
  }
  oscillation(mesh, surface, f_density_on_M, quad, out.osc_sq,
              out.total_osc_sq);
  return out;
}

/// Jump + coderivative part only, for a difference field (discrete
/// efficiency measurements).
inline double jump_coderiv_energy(const SurfaceMesh& mesh,
                                  const Eigen::VectorXd& coefficients) {
  DofMap dofs(mesh);
  detail::EdgeTrace trace(mesh, dofs);
  std::vector<double> per_tri(mesh.n_tris(), 0.0);
  EdgeRule erule = edge_gauss(3);
  for (int e = 0; e < mesh.n_edges(); ++e) {
    int t0 = mesh.edge_tris[e][0], t1 = mesh.edge_tris[e][1];
    double len = (mesh.vertices[mesh.edges[e][1]] -
                  mesh.vertices[mesh.edges[e][0]])
                     .norm();
    double acc = 0.0;
    for (std::size_t q = 0; q < erule.nodes.size(); ++q) {
      double jump = trace.normal_component(t0, e, coefficients,
                                           erule.nodes[q]) +
                    trace.normal_component(t1, e, coefficients,
                                           erule.nodes[q]);
      acc += erule.weights[q] * jump * jump;
    }
    per_tri[t0] += len * acc;
    per_tri[t1] += len * acc;
  }
  double total = 0.0;
  for (int t = 0; t < mesh.n_tris(); ++t)
    total += element_diameter(mesh, t) * per_tri[t];
  return total;
}

inline double global_eta(const IndicatorField& field,
                         const MarkedSet* subset = nullptr) {
  if (!subset) return field.total_eta_sq;
  double acc = 0.0;
  for (int id : *subset) acc += field.eta_sq[id];
  return acc;
}

} // namespace hodgefem

#endif
