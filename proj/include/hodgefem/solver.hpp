#ifndef HODGEFEM_SOLVER_HPP
#define HODGEFEM_SOLVER_HPP

#include "hodgefem/core.hpp"
#include "hodgefem/feec.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <optional>
#include <string>

namespace hodgefem {

/// Assembled saddle-point blocks of the discrete mixed Hodge-Laplace problem
/// (k = m) on a closed surface; unknowns (s, y, c) = (edge dofs of sigma,
/// density dofs of u, harmonic multiplier).
struct MixedSystem {
  SpMat M1;            // 1-form mass in the L2(M) inner product
  SpMat M2;            // top-form mass (diagonal)
  SpMat D;             // +-1 incidence
  SpMat B;             // diag(1/area) * D: density of d(sigma)
  Eigen::VectorXd hb;  // discrete volume form (all-ones density)
  Eigen::VectorXd F;   // load
  Eigen::VectorXd areas;
  SpMat K;             // symmetric indefinite block matrix
  Eigen::VectorXd rhs;
  int n1 = 0, n2 = 0;
  const SurfaceMesh* mesh = nullptr; // enables the structured fast solver

  void build_block_system() {
    n1 = static_cast<int>(M1.rows());
    n2 = static_cast<int>(M2.rows());
    Eigen::VectorXd m2 = M2.diagonal();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(M1.nonZeros() + 2 * B.nonZeros() + 2 * n2);
    for (int k = 0; k < M1.outerSize(); ++k)
      for (SpMat::InnerIterator it(M1, k); it; ++it)
        trips.emplace_back(static_cast<int>(it.row()),
                           static_cast<int>(it.col()), -it.value());
    for (int k = 0; k < B.outerSize(); ++k)
      for (SpMat::InnerIterator it(B, k); it; ++it) {
        int t = static_cast<int>(it.row());
        int e = static_cast<int>(it.col());
        double v = m2[t] * it.value();
        trips.emplace_back(e, n1 + t, v);     // B^T M2 block
        trips.emplace_back(n1 + t, e, v);     // M2 B block
      }
    for (int t = 0; t < n2; ++t) {
      double v = m2[t] * hb[t];
      trips.emplace_back(n1 + t, n1 + n2, v);
      trips.emplace_back(n1 + n2, n1 + t, v);
    }
    K.resize(n1 + n2 + 1, n1 + n2 + 1);
    K.setFromTriplets(trips.begin(), trips.end());
    rhs = Eigen::VectorXd::Zero(n1 + n2 + 1);
    rhs.segment(n1, n2) = F;
  }
};

struct SolveStats {
  double residual_norm = 0.0;
  double rhs_norm = 0.0;
  int unknowns = 0;
};

struct MixedSolution {
  FormVector sigma; // k = 1
  FormVector u;     // k = 2
  double p_const = 0.0;
  double residual_norm = 0.0;
  SolveStats stats;
};

/// Assemble (DHL) for analytic density data on M. The data is used as given;
/// callers wanting a B problem reduce f beforehand (harmonic_component_top).
inline MixedSystem assemble_mixed(const SurfaceMesh& mesh,
                                  const ImplicitSurface& surface,
                                  const ScalarField& f_density_on_M,
                                  const QuadratureRule& quad) {
  MixedSystem sys;
  DofMap dofs(mesh);
  sys.M1 = mass_matrix(mesh, surface, 1, quad);
  sys.M2 = mass_matrix(mesh, surface, 2, quad);
  sys.D = exterior_derivative_matrix(mesh, dofs);
  sys.areas.resize(mesh.n_tris());
  for (int t = 0; t < mesh.n_tris(); ++t) sys.areas[t] = mesh.area(t);
  sys.B = sys.D;
  for (int k = 0; k < sys.B.outerSize(); ++k)
    for (SpMat::InnerIterator it(sys.B, k); it; ++it)
      it.valueRef() /= sys.areas[it.row()];
  sys.hb = Eigen::VectorXd::Ones(mesh.n_tris());
  sys.F = load_vector(mesh, surface, f_density_on_M, quad);
  sys.mesh = &mesh;
  sys.build_block_system();
  return sys;
}

/// Assemble with discrete data living on this mesh (or a coarse ancestor,
/// prolonged by the caller): F = M2 * f_coeffs.
inline MixedSystem assemble_mixed(const SurfaceMesh& mesh,
                                  const ImplicitSurface& surface,
                                  const FormVector& f_coeffs,
                                  const QuadratureRule& quad) {
  if (f_coeffs.coefficients.size() != mesh.n_tris())
    throw NotNested("discrete data does not match the mesh");
  MixedSystem sys;
  DofMap dofs(mesh);
  sys.M1 = mass_matrix(mesh, surface, 1, quad);
  sys.M2 = mass_matrix(mesh, surface, 2, quad);
  sys.D = exterior_derivative_matrix(mesh, dofs);
  sys.areas.resize(mesh.n_tris());
  for (int t = 0; t < mesh.n_tris(); ++t) sys.areas[t] = mesh.area(t);
  sys.B = sys.D;
  for (int k = 0; k < sys.B.outerSize(); ++k)
    for (SpMat::InnerIterator it(sys.B, k); it; ++it)
      it.valueRef() /= sys.areas[it.row()];
  sys.hb = Eigen::VectorXd::Ones(mesh.n_tris());
  sys.F = sys.M2 * f_coeffs.coefficients;
  sys.mesh = &mesh;
  sys.build_block_system();
  return sys;
}

namespace detail {

/// Zero out row/column `pin` of an SPD matrix with a one-dimensional kernel
/// and put a 1 on the pinned diagonal; for consistent right-hand sides with
/// rhs[pin] = 0 this selects the representative vanishing at `pin`.
inline SpMat pin_singular_spd(const SpMat& A, int pin) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(A.nonZeros() + 1);
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it)
      if (it.row() != pin && it.col() != pin)
        trips.emplace_back(static_cast<int>(it.row()),
                           static_cast<int>(it.col()), it.value());
  trips.emplace_back(pin, pin, 1.0);
  SpMat out(A.rows(), A.cols());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

} // namespace detail

/// Shared factorization for systems differing only in the right-hand side.
///
/// On genus-0 meshes the block system splits: the harmonic multiplier is
/// explicit, sigma = (tree particular solution of D s = z) + gradient part
/// from a vertex Laplacian, and u comes from the dual-graph Laplacian — two
/// SPD Cholesky solves instead of one indefinite factorization. Surfaces
/// with harmonic 1-forms fall back to sparse LU on the full block matrix.
class MixedFactorization {
 public:
  explicit MixedFactorization(const MixedSystem& sys) : sys_(&sys) {
    structured_ = sys.mesh && sys.mesh->euler_characteristic() == 2;
    if (structured_)
      build_structured();
    else {
      lu_.compute(sys.K);
      if (lu_.info() != Eigen::Success)
        throw SingularSystem("saddle-point factorization failed");
    }
  }

  MixedSolution solve(const Eigen::VectorXd& F, double tol) const {
    const MixedSystem& sys = *sys_;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(sys.n1 + sys.n2 + 1);
    rhs.segment(sys.n1, sys.n2) = F;
    Eigen::VectorXd x;
    if (structured_) {
      x = solve_structured(rhs);
      for (int pass = 0; pass < 3; ++pass) {
        Eigen::VectorXd res = rhs - sys.K * x;
        if (res.norm() <= 0.1 * tol * rhs.norm()) break;
        x += solve_structured(res);
      }
    } else {
      x = lu_.solve(rhs);
    }
    MixedSolution sol;
    sol.sigma.degree = 1;
    sol.sigma.coefficients = x.head(sys.n1);
    sol.u.degree = 2;
    sol.u.coefficients = x.segment(sys.n1, sys.n2);
    sol.p_const = x[sys.n1 + sys.n2];
    if (sys.mesh) {
      sol.sigma.mesh_signature = sys.mesh->root_signature;
      sol.u.mesh_signature = sys.mesh->root_signature;
    }
    double rhs_norm = rhs.norm();
    sol.residual_norm = (sys.K * x - rhs).norm();
    sol.stats.residual_norm = sol.residual_norm;
    sol.stats.rhs_norm = rhs_norm;
    sol.stats.unknowns = sys.n1 + sys.n2 + 1;
    if (rhs_norm > 0 && sol.residual_norm > tol * rhs_norm)
      throw SolveFailure("relative residual above tolerance");
    return sol;
  }

 private:
  void build_structured() {
    const MixedSystem& sys = *sys_;
    const SurfaceMesh& mesh = *sys.mesh;
    grad_ = vertex_incidence_matrix(mesh);
    SpMat Av = SpMat(grad_.transpose() * sys.M1 * grad_);
    vertex_ldlt_.compute(detail::pin_singular_spd(Av, 0));
    if (vertex_ldlt_.info() != Eigen::Success)
      throw SingularSystem("vertex Laplacian factorization failed");
    SpMat Lt = SpMat(sys.D * SpMat(sys.D.transpose()));
    dual_ldlt_.compute(detail::pin_singular_spd(Lt, 0));
    if (dual_ldlt_.info() != Eigen::Success)
      throw SingularSystem("dual Laplacian factorization failed");
  }

  /// Direct solve of the full block system with an arbitrary right-hand side
  /// (r1, r2, r3): the multiplier is explicit, the divergence constraint is
  /// met by the minimum-norm particular solution from the dual Laplacian, the
  /// gradient part comes from the vertex Laplacian, and u closes the system.
  Eigen::VectorXd solve_structured(const Eigen::VectorXd& full_rhs) const {
    const MixedSystem& sys = *sys_;
    Eigen::VectorXd r1 = full_rhs.head(sys.n1);
    Eigen::VectorXd r2 = full_rhs.segment(sys.n1, sys.n2);
    double r3 = full_rhs[sys.n1 + sys.n2];
    Eigen::VectorXd m2 = sys.M2.diagonal();
    double total_area = sys.areas.sum();

    // M2 B s + M2 hb c = r2  =>  D s = areas .* (M2^{-1} r2 - c)
    Eigen::VectorXd g2 = r2.cwiseQuotient(m2);
    double c = sys.areas.dot(g2) / total_area;
    Eigen::VectorXd z = sys.areas.cwiseProduct(
        g2 - Eigen::VectorXd::Constant(sys.n2, c));
    Eigen::VectorXd zp = z;
    zp[0] = 0.0;
    Eigen::VectorXd s = sys.D.transpose() * dual_ldlt_.solve(zp);

    // -M1 s + B^T M2 y = r1 is solvable iff G^T (M1 s + r1) = 0
    Eigen::VectorXd rv = -(grad_.transpose() * (sys.M1 * s + r1));
    rv[0] = 0.0;
    s += grad_ * vertex_ldlt_.solve(rv);

    // D^T chi = M1 s + r1 with chi_t = m2_t y_t / area_t, gauged by r3
    Eigen::VectorXd rt = sys.D * (sys.M1 * s + r1);
    rt[0] = 0.0;
    Eigen::VectorXd chi = dual_ldlt_.solve(rt);
    double kappa = (r3 - sys.areas.dot(chi)) / total_area;
    Eigen::VectorXd y =
        (chi.array() + kappa).matrix().cwiseProduct(sys.areas).cwiseQuotient(
            m2);

    Eigen::VectorXd x(sys.n1 + sys.n2 + 1);
    x.head(sys.n1) = s;
    x.segment(sys.n1, sys.n2) = y;
    x[sys.n1 + sys.n2] = c;
    return x;
  }

  const MixedSystem* sys_;
  bool structured_ = false;
  Eigen::SparseLU<SpMat> lu_;
  SpMat grad_;
  Eigen::SimplicialLDLT<SpMat> vertex_ldlt_, dual_ldlt_;
};

inline MixedSolution solve_mixed(const MixedSystem& sys, double tol = 1e-10) {
  MixedFactorization fac(sys);
  return fac.solve(sys.F, tol);
}

// ---------------------------------------------------------------------------
// Manufactured solutions on the unit sphere
// ---------------------------------------------------------------------------

/// Analytic triple (f, sigma, u) for the top-degree Hodge Laplacian on the
/// unit sphere, built from a zero-mean potential w: u = w vol, f = (Lw) vol,
/// sigma = delta u, realized as the tangent field -nu x grad_M(w).
struct ManufacturedSolution {
  std::string name;
  ScalarField f_density;       // on M
  VectorField sigma_field;     // tangent vector (covector via metric) on M
  ScalarField u_density;       // on M, zero mean
};

inline ManufacturedSolution manufactured_solution(const std::string& name) {
  ManufacturedSolution ms;
  ms.name = name;
  // optional amplitude: "y1:scale=0.02" etc. (everything is linear in f)
  std::string base = name;
  double scale = 1.0;
  if (auto pos = name.find(":scale="); pos != std::string::npos) {
    base = name.substr(0, pos);
    try {
      scale = std::stod(name.substr(pos + 7));
    } catch (const std::exception&) {
      throw UnknownCase("bad scale in case name: " + name);
    }
  }
  if (base == "y1" || base == "Y1") {
    // w = z, eigenvalue l(l+1) = 2
    ms.u_density = [scale](const Vec3& p) { return scale * p[2]; };
    ms.f_density = [scale](const Vec3& p) { return scale * 2.0 * p[2]; };
    ms.sigma_field = [scale](const Vec3& p) {
      Vec3 grad_w = Vec3(0, 0, 1) - p[2] * p;
      return Vec3(-scale * p.cross(grad_w));
    };
    return ms;
  }
  if (base == "y2" || base == "Y2") {
    // w = z^2 - 1/3, eigenvalue l(l+1) = 6
    ms.u_density = [scale](const Vec3& p) {
      return scale * (p[2] * p[2] - 1.0 / 3.0);
    };
    ms.f_density = [scale](const Vec3& p) {
      return scale * 6.0 * (p[2] * p[2] - 1.0 / 3.0);
    };
    ms.sigma_field = [scale](const Vec3& p) {
      Vec3 grad_w = 2.0 * p[2] * (Vec3(0, 0, 1) - p[2] * p);
      return Vec3(-scale * p.cross(grad_w));
    };
    return ms;
  }
  if (name.rfind("gaussian-bump", 0) == 0) {
    Vec3 center(0, 0, 1);
    double width = 0.2;
    auto pos = name.find(':');
    if (pos != std::string::npos) {
      std::string args = name.substr(pos + 1);
      for (auto& c : args)
        if (c == ',') c = ' ';
      std::istringstream is(args);
      std::string tok;
      while (is >> tok) {
        if (tok.rfind("width=", 0) == 0) width = std::stod(tok.substr(6));
        else if (tok.rfind("cx=", 0) == 0) center[0] = std::stod(tok.substr(3));
        else if (tok.rfind("cy=", 0) == 0) center[1] = std::stod(tok.substr(3));
        else if (tok.rfind("cz=", 0) == 0) center[2] = std::stod(tok.substr(3));
        else throw UnknownCase("bad gaussian-bump parameter: " + tok);
      }
      center.normalize();
    }
    double s2 = width * width;
    Vec3 c = center;
    // zonal potential g(t) = exp((t - 1)/s^2), t = p . c
    auto g = [s2](double t) { return std::exp((t - 1.0) / s2); };
    ms.f_density = [c, s2, g](const Vec3& p) {
      double t = p.dot(c);
      // -Laplace-Beltrami of the zonal potential
      return -g(t) * ((1.0 - t * t) / (s2 * s2) - 2.0 * t / s2);
    };
    ms.sigma_field = [c, s2, g](const Vec3& p) {
      double t = p.dot(c);
      // -nu x grad_M(w) with grad_M(w) = g'(t) (c - t p)
      return Vec3(-(g(t) / s2) * p.cross(c));
    };
    // mean of the zonal exponential over the sphere: integral over t in
    // [-1, 1] of g / 2 = s^2 (1 - exp(-2/s^2)) / 2
    double mean = 0.5 * s2 * (1.0 - std::exp(-2.0 / s2));
    ms.u_density = [g, c, mean](const Vec3& p) { return g(p.dot(c)) - mean; };
    return ms;
  }
  throw UnknownCase("unknown manufactured case: " + name);
}

/// ||sigma_exact - i_A sigma_h||_{L2(M)} by quadrature on the flat mesh.
inline double reference_error(const SurfaceMesh& mesh,
                              const ImplicitSurface& surface,
                              const FormVector& sigma_h,
                              const VectorField& sigma_exact,
                              const QuadratureRule& quad) {
  DofMap dofs(mesh);
  double acc = 0.0;
  for (int t = 0; t < mesh.n_tris(); ++t) {
    detail::WhitneyElement el(mesh, dofs, t);
    for (std::size_t q = 0; q < quad.points.size(); ++q) {
      Vec3 x = detail::bary_point(el.frame, mesh, t, quad.points[q]);
      TangentSample ts = tangent_map(surface, el.frame, x);
      Vec2 pulled = ts.jacobian.transpose() * sigma_exact(ts.projected_point);
      Vec2 diff = pulled - el.field(sigma_h.coefficients, quad.points[q]);
      Mat2 Ginv = ts.metric.inverse();
      acc += quad.weights[q] * 2.0 * el.frame.area * ts.area_factor *
             diff.dot(Ginv * diff);
    }
  }
  return std::sqrt(acc);
}

/// L2(M) norm of the difference of two mapped Whitney fields on one mesh.
inline double sigma_distance(const SurfaceMesh& mesh, const SpMat& M1,
                             const Eigen::VectorXd& a,
                             const Eigen::VectorXd& b) {
  Eigen::VectorXd d = a - b;
  return std::sqrt(std::max(0.0, d.dot(M1 * d)));
}

} // namespace hodgefem

#endif
