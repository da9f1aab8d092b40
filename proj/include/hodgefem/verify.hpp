#ifndef HODGEFEM_VERIFY_HPP
#define HODGEFEM_VERIFY_HPP

#include "hodgefem/adapt.hpp"
#include "hodgefem/core.hpp"
#include "hodgefem/estimator.hpp"
#include "hodgefem/solver.hpp"

#include <random>
#include <set>
#include <sstream>
#include <vector>

namespace hodgefem {

struct CheckResult {
  std::string id;        // short selector, e.g. "pl1"
  std::string name;
  double measured = 0.0; // measured constant or residual
  double cap = 0.0;      // pass when measured <= cap (or stability criterion)
  bool pass = false;
  std::string note;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

struct VerifyConfig {
  std::string surface_name = "sphere";
  std::string mesh_preset = "icosahedron";
  std::string case_name = "y1";
  double theta = 0.5;
  double delta = 0.1;
  int ladder_iterations = 10; // adaptive iterations feeding the nested pairs
  int quad_degree = 4;
  int ref_quad_degree = 6;
  double solver_tol = 1e-10;
  unsigned seed = 20240817;
  std::set<std::string> selected; // empty: run everything
};

namespace detail {

inline bool selected(const VerifyConfig& cfg, const std::string& id) {
  return cfg.selected.empty() || cfg.selected.count(id) > 0;
}

/// max/min over positive samples; pass when <= 2 (stability criterion).
inline CheckResult stability_check(const std::string& id,
                                   const std::string& name,
                                   const std::vector<double>& samples,
                                   double extra_cap = 0.0) {
  CheckResult c;
  c.id = id;
  c.name = name;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (double s : samples) {
    if (!std::isfinite(s)) {
      c.pass = false;
      c.note = "non-finite constant";
      return c;
    }
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  c.measured = hi;
  c.cap = extra_cap > 0 ? extra_cap : 2.0 * std::max(lo, 1e-300);
  bool stable = samples.size() < 2 || hi <= 1e-10 ||
                hi <= 2.0 * std::max(lo, 1e-300);
  bool capped = extra_cap <= 0 || hi <= extra_cap;
  c.pass = stable && capped;
  std::ostringstream os;
  os << "range [" << lo << ", " << hi << "] over " << samples.size()
     << " pairs";
  c.note = os.str();
  return c;
}

} // namespace detail

/// Numerically checks the supporting identities and inequality constants:
/// projection lemmas, adjoint identity, commutation, Poincare, quasi-
/// orthogonality, stability, upper/lower bounds, discrete efficiency and
/// estimator continuity. Constants are measured; caps encode "finite and
/// stable within a factor 2 across the nested pairs".
inline VerifyReport verify_lemmas(const VerifyConfig& cfg) {
  VerifyReport report;
  ImplicitSurface surface = ImplicitSurface::from_name(cfg.surface_name);
  ManufacturedSolution mcase = manufactured_solution(cfg.case_name);
  QuadratureRule quad = quadrature_rule(cfg.quad_degree);
  QuadratureRule ref_quad = quadrature_rule(cfg.ref_quad_degree);
  std::mt19937 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  // ------------------------------------------------------------------
  // Projection lemmas on a nested pair with random discrete data
  // ------------------------------------------------------------------
  SurfaceMesh coarse0 = build_initial(cfg.surface_name, cfg.mesh_preset);
  SurfaceMesh coarse = uniform_refine(coarse0, 1);
  SurfaceMesh fine;
  {
    MarkedSet some;
    for (int t = 0; t < coarse.n_tris(); t += 3) some.push_back(t);
    fine = uniform_refine(bisect(coarse, some), 1);
  }
  std::vector<int> parent_map;
  is_refinement_of(fine, coarse, &parent_map);

  if (detail::selected(cfg, "pl1")) {
    FormVector fh;
    fh.degree = 2;
    fh.coefficients.resize(fine.n_tris());
    for (int t = 0; t < fine.n_tris(); ++t) fh.coefficients[t] = unit(rng);
    FormVector IH = canonical_projection_top(coarse, fine, fh);
    double worst = 0.0;
    Eigen::VectorXd residual = Eigen::VectorXd::Zero(coarse.n_tris());
    Eigen::VectorXd magnitude = Eigen::VectorXd::Zero(coarse.n_tris());
    for (int t = 0; t < fine.n_tris(); ++t) {
      double a = fine.area(t);
      residual[parent_map[t]] +=
          a * (fh.coefficients[t] - IH.coefficients[parent_map[t]]);
      magnitude[parent_map[t]] += a * std::abs(fh.coefficients[t]);
    }
    for (int t = 0; t < coarse.n_tris(); ++t)
      worst = std::max(worst,
                       std::abs(residual[t]) / std::max(magnitude[t], 1e-300));
    CheckResult c{"pl1", "per-element integral of (f_h - I_H f_h)", worst,
                  1e-13, worst <= 1e-13, ""};
    report.checks.push_back(c);
  }

  if (detail::selected(cfg, "pl2")) {
    FormVector fh, uh;
    fh.degree = uh.degree = 2;
    fh.coefficients.resize(fine.n_tris());
    uh.coefficients.resize(fine.n_tris());
    for (int t = 0; t < fine.n_tris(); ++t) {
      fh.coefficients[t] = unit(rng);
      uh.coefficients[t] = unit(rng);
    }
    FormVector IHf = canonical_projection_top(coarse, fine, fh);
    FormVector IHu = canonical_projection_top(coarse, fine, uh);
    // flat inner products per coarse element; I_h is the identity here
    Eigen::VectorXd lhs = Eigen::VectorXd::Zero(coarse.n_tris());
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(coarse.n_tris());
    Eigen::VectorXd scale = Eigen::VectorXd::Zero(coarse.n_tris());
    for (int t = 0; t < fine.n_tris(); ++t) {
      int T = parent_map[t];
      double a = fine.area(t);
      lhs[T] += a * (uh.coefficients[t] - IHu.coefficients[T]) *
                fh.coefficients[t];
      rhs[T] += a * uh.coefficients[t] *
                (fh.coefficients[t] - IHf.coefficients[T]);
      scale[T] += a * std::abs(uh.coefficients[t] * fh.coefficients[t]);
    }
    double worst = 0.0;
    for (int t = 0; t < coarse.n_tris(); ++t)
      worst = std::max(worst, std::abs(lhs[t] - rhs[t]) /
                                  std::max(scale[t], 1e-300));
    report.checks.push_back({"pl2", "canonical-projection symmetry", worst,
                             1e-12, worst <= 1e-12, ""});
  }

  // ------------------------------------------------------------------
  // Adjoint identity (double Hodge star route) on random form pairs
  // ------------------------------------------------------------------
  if (detail::selected(cfg, "star")) {
    SurfaceMesh m = uniform_refine(coarse0, 3);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      Vec3 a(unit(rng), unit(rng), unit(rng));
      Vec3 b(unit(rng), unit(rng), unit(rng));
      double ca = unit(rng), cb = unit(rng);
      ScalarField u = [a, ca](const Vec3& x) { return ca + a.dot(x); };
      ScalarField v = [b, cb](const Vec3& x) { return cb + b.dot(x); };
      // route 1: <i_A u, i_A v>_M through the pullback inner product
      double lhs = 0.0;
      for (int t = 0; t < m.n_tris(); ++t) {
        TriangleFrame frame = m.frame(t);
        for (std::size_t q = 0; q < ref_quad.points.size(); ++q) {
          Vec3 x = detail::bary_point(frame, m, t, ref_quad.points[q]);
          TangentSample ts = tangent_map(surface, frame, x);
          lhs += 2.0 * frame.area * ref_quad.weights[q] * u(x) * v(x) /
                 ts.area_factor;
        }
      }
      // route 2: <i_A^* i_A u, v>_{M_A}; i_A^* via the double-star formula
      // reduces to composing the M-density with the projection
      double rhs = 0.0;
      for (int t = 0; t < m.n_tris(); ++t) {
        TriangleFrame frame = m.frame(t);
        for (std::size_t q = 0; q < quad.points.size(); ++q) {
          Vec3 x = detail::bary_point(frame, m, t, quad.points[q]);
          TangentSample ts = tangent_map(surface, frame, x);
          double star_pull = u(x) / ts.area_factor; // M-density of i_A u at a(x)
          rhs += 2.0 * frame.area * quad.weights[q] * star_pull * v(x);
        }
      }
      worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(lhs),
                                                             1e-300));
    }
    report.checks.push_back({"star", "adjoint identity (double Hodge star)",
                             worst, 1e-5, worst <= 1e-5,
                             "10 random affine form pairs"});
  }

  // ------------------------------------------------------------------
  // Mapped canonical projection commutes with d
  // ------------------------------------------------------------------
  if (detail::selected(cfg, "commute")) {
    SurfaceMesh m = uniform_refine(coarse0, 4);
    DofMap dofs(m);
    SpMat D = exterior_derivative_matrix(m, dofs);
    double worst = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
      Vec3 a(unit(rng), unit(rng), unit(rng));
      Vec3 b(unit(rng), unit(rng), unit(rng));
      // ambient 1-form omega = a + b x x (curl(omega) = 2b), pulled through
      // the composite map x -> a(x)
      auto omega = [a, b](const Vec3& p) { return Vec3(a + b.cross(p)); };
      Vec3 curl = 2.0 * b;
      VectorField pulled = [&surface, omega](const Vec3& x) -> Vec3 {
        double d = surface.signed_distance(x);
        Vec3 nu = surface.gradient(x);
        Mat3 S = surface.shape_operator(x);
        Mat3 grad_a = (Mat3::Identity() - nu * nu.transpose()) + d * S;
        return grad_a.transpose() * omega(x - d * nu);
      };
      FormVector edge = canonical_projection_edge(m, pulled, 5);
      Eigen::VectorXd lhs = D * edge.coefficients; // element integrals of d(pi_A tau)
      double num = 0.0, den = 0.0;
      for (int t = 0; t < m.n_tris(); ++t) {
        TriangleFrame frame = m.frame(t);
        double integral = 0.0;
        for (std::size_t q = 0; q < ref_quad.points.size(); ++q) {
          Vec3 x = detail::bary_point(frame, m, t, ref_quad.points[q]);
          TangentSample ts = tangent_map(surface, frame, x);
          Vec3 j1(ts.jacobian(0, 0), ts.jacobian(1, 0), ts.jacobian(2, 0));
          Vec3 j2(ts.jacobian(0, 1), ts.jacobian(1, 1), ts.jacobian(2, 1));
          // pullback of the ambient 2-form d(omega) through x -> a(x)
          integral += 2.0 * frame.area * ref_quad.weights[q] *
                      curl.dot(j1.cross(j2));
        }
        num += (lhs[t] - integral) * (lhs[t] - integral);
        den += integral * integral;
      }
      worst = std::max(worst, std::sqrt(num / std::max(den, 1e-300)));
    }
    report.checks.push_back({"commute", "mapped canonical projection, I d = d I",
                             worst, 1e-5, worst <= 1e-5, ""});
  }

  // ------------------------------------------------------------------
  // Discrete Poincare constant across two levels (dense, coarse meshes)
  // ------------------------------------------------------------------
  if (detail::selected(cfg, "poincare")) {
    std::vector<double> cps;
    SurfaceMesh m = coarse0;
    for (int level = 0; level < 2; ++level) {
      DofMap dofs(m);
      SpMat M1s = mass_matrix(m, surface, 1, quad);
      SpMat M2s = mass_matrix(m, surface, 2, quad);
      SpMat D = exterior_derivative_matrix(m, dofs);
      Eigen::VectorXd inv_area(m.n_tris());
      for (int t = 0; t < m.n_tris(); ++t) inv_area[t] = 1.0 / m.area(t);
      Eigen::MatrixXd B = Eigen::MatrixXd(inv_area.asDiagonal() * D);
      Eigen::MatrixXd A = B.transpose() * Eigen::MatrixXd(M2s) * B;
      Eigen::MatrixXd M1d(M1s);
      Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(A, M1d);
      const auto& ev = es.eigenvalues();
      double max_ev = ev[ev.size() - 1];
      double min_pos = max_ev;
      for (int i = 0; i < ev.size(); ++i)
        if (ev[i] > 1e-8 * max_ev) {
          min_pos = ev[i];
          break;
        }
      cps.push_back(1.0 / std::sqrt(min_pos));
      m = uniform_refine(m, 1);
    }
    report.checks.push_back(
        detail::stability_check("poincare", "discrete Poincare constant", cps));
  }

  // ------------------------------------------------------------------
  // Solve-based inequality constants on nested pairs from an adaptive run
  // ------------------------------------------------------------------
  bool need_solves = false;
  for (const char* id :
       {"nesttri", "quasi0", "conts", "dstab", "cub", "dub", "diseff", "conee"})
    if (detail::selected(cfg, id)) need_solves = true;

  if (need_solves) {
    AmfemConfig acfg;
    acfg.theta = cfg.theta;
    acfg.epsilon = 1e-12; // run to the iteration cap
    acfg.max_iter = cfg.ladder_iterations;
    acfg.surface_name = cfg.surface_name;
    acfg.mesh_preset = cfg.mesh_preset;
    acfg.case_name = cfg.case_name;
    acfg.quad_degree = cfg.quad_degree;
    acfg.ref_quad_degree = cfg.ref_quad_degree;
    acfg.solver_tol = cfg.solver_tol;
    acfg.keep_meshes = true;
    acfg.compute_reference = false;
    AmfemRun run = amfem_run(acfg);
    const int n_levels = static_cast<int>(run.meshes.size());
    if (n_levels < 4)
      throw InsufficientData("verify ladder needs >= 4 adaptive levels");
    int first = n_levels - 4; // three consecutive pairs

    // overkill reference: two uniform refinements past the finest level
    SurfaceMesh ref_mesh = uniform_refine(run.meshes.back(), 2);
    // reduce the data once on the overkill mesh
    HarmonicSplit split =
        harmonic_component_top(ref_mesh, surface, mcase.f_density, ref_quad);
    ScalarField f_reduced = split.residual;

    MixedSystem ref_sys = assemble_mixed(ref_mesh, surface, f_reduced, quad);
    MixedFactorization ref_fac(ref_sys);
    MixedSolution ref_sol = ref_fac.solve(ref_sys.F, cfg.solver_tol);

    std::vector<double> qo_defect, conts_c, dstab_c, cub_c, dub_c, diseff_c,
        conee_beta, quasi0_c, lower_c;

    for (int pair = 0; pair < 3; ++pair) {
      const SurfaceMesh& H = run.meshes[first + pair];
      const SurfaceMesh& h = run.meshes[first + pair + 1];
      std::vector<int> pm_hH, pm_refh, pm_refH;
      is_refinement_of(h, H, &pm_hH);
      is_refinement_of(ref_mesh, h, &pm_refh);
      is_refinement_of(ref_mesh, H, &pm_refH);

      MixedSystem sys_H = assemble_mixed(H, surface, f_reduced, quad);
      MixedSystem sys_h = assemble_mixed(h, surface, f_reduced, quad);
      MixedFactorization fac_h(sys_h);
      MixedSolution sol_H = solve_mixed(sys_H, cfg.solver_tol);
      MixedSolution sol_h = fac_h.solve(sys_h.F, cfg.solver_tol);

      FormVector f_H, f_h;
      f_H.degree = f_h.degree = 2;
      f_H.coefficients =
          sys_H.F.cwiseQuotient(Eigen::VectorXd(sys_H.M2.diagonal()));
      f_h.coefficients =
          sys_h.F.cwiseQuotient(Eigen::VectorXd(sys_h.M2.diagonal()));

      // sigma~_h: fine solve with coarse data
      FormVector f_H_on_h = prolong_topform(f_H, h, pm_hH);
      MixedSolution sol_th =
          fac_h.solve(sys_h.M2 * f_H_on_h.coefficients, cfg.solver_tol);

      double osc_H = std::sqrt(oscillation_nested(H, h, f_h));
      std::vector<double> osc_h_vec;
      double osc_h_sq = 0.0;
      oscillation(h, surface, f_reduced, quad, osc_h_vec, osc_h_sq);

      // prolong everything to the overkill mesh
      FormVector sH_h = prolong_edgeform(H, sol_H.sigma, h, pm_hH);
      FormVector sH_ref = prolong_edgeform(h, sH_h, ref_mesh, pm_refh);
      FormVector sh_ref = prolong_edgeform(h, sol_h.sigma, ref_mesh, pm_refh);
      FormVector sth_ref = prolong_edgeform(h, sol_th.sigma, ref_mesh, pm_refh);

      Eigen::VectorXd d_ref_h =
          ref_sol.sigma.coefficients - sh_ref.coefficients;
      Eigen::VectorXd d_th_H = sth_ref.coefficients - sH_ref.coefficients;
      double n_ref_h = std::sqrt(d_ref_h.dot(ref_sys.M1 * d_ref_h));
      double n_th_H = std::sqrt(d_th_H.dot(ref_sys.M1 * d_th_H));
      double inner = d_ref_h.dot(ref_sys.M1 * d_th_H);
      qo_defect.push_back(std::abs(inner) /
                          (n_ref_h * n_th_H + 1e-30));

      double e_H = sigma_distance(ref_mesh, ref_sys.M1,
                                  ref_sol.sigma.coefficients,
                                  sH_ref.coefficients);
      double e_h = n_ref_h;
      double dist_hH = sigma_distance(h, sys_h.M1, sol_h.sigma.coefficients,
                                      sH_h.coefficients);
      double dist_h_th = sigma_distance(h, sys_h.M1, sol_h.sigma.coefficients,
                                        sol_th.sigma.coefficients);

      IndicatorField ind_H =
          element_indicators(H, surface, sol_H.sigma, f_reduced, quad);
      IndicatorField ind_h =
          element_indicators(h, surface, sol_h.sigma, f_reduced, quad);
      IndicatorField ind_Hh =
          element_indicators(h, surface, sH_h, f_reduced, quad);

      dstab_c.push_back(dist_h_th / std::max(osc_H, 1e-30));
      cub_c.push_back(e_H * e_H / ind_H.total_eta_sq);
      dub_c.push_back(dist_hH * dist_hH / ind_H.total_eta_sq);
      lower_c.push_back(ind_H.total_eta_sq /
                        (e_H * e_H + ind_H.total_osc_sq + 1e-30));

      Eigen::VectorXd delta_sigma =
          sol_h.sigma.coefficients - sH_h.coefficients;
      diseff_c.push_back(jump_coderiv_energy(h, delta_sigma) /
                         std::max(dist_hH * dist_hH, 1e-30));

      // smallest Lambda with eta(v)^2 <= (1+delta) eta(w)^2 + Lambda dist^2,
      // taken over both orderings of the pair
      double lam1 = ind_Hh.total_eta_sq - (1.0 + cfg.delta) * ind_h.total_eta_sq;
      double lam2 = ind_h.total_eta_sq - (1.0 + cfg.delta) * ind_Hh.total_eta_sq;
      conee_beta.push_back(std::max({lam1, lam2, 0.0}) /
                           std::max(dist_hH * dist_hH, 1e-30));

      // sigma_tilde = L^{-1} f_h approximated on the overkill mesh
      FormVector f_h_ref = prolong_topform(f_h, ref_mesh, pm_refh);
      MixedSolution sol_ref_fh =
          ref_fac.solve(ref_sys.M2 * f_h_ref.coefficients, cfg.solver_tol);
      Eigen::VectorXd d_conts =
          ref_sol.sigma.coefficients - sol_ref_fh.sigma.coefficients;
      conts_c.push_back(std::sqrt(d_conts.dot(ref_sys.M1 * d_conts)) /
                        std::max(std::sqrt(osc_h_sq), 1e-30));

      double slack = (1.0 - cfg.delta) * e_h * e_h - e_H * e_H +
                     dist_hH * dist_hH;
      quasi0_c.push_back(cfg.delta * std::max(slack, 0.0) /
                         std::max(osc_H * osc_H, 1e-30));
    }

    if (detail::selected(cfg, "nesttri")) {
      double worst = *std::max_element(qo_defect.begin(), qo_defect.end());
      report.checks.push_back({"nesttri", "quasi-orthogonality defect", worst,
                               0.05, worst <= 0.05, "normalized inner product"});
    }
    if (detail::selected(cfg, "quasi0"))
      report.checks.push_back(detail::stability_check(
          "quasi0", "quasi-orthogonality constant C0", quasi0_c));
    if (detail::selected(cfg, "conts"))
      report.checks.push_back(detail::stability_check(
          "conts", "continuous stability constant", conts_c));
    if (detail::selected(cfg, "dstab"))
      report.checks.push_back(detail::stability_check(
          "dstab", "discrete stability constant", dstab_c));
    if (detail::selected(cfg, "cub"))
      report.checks.push_back(detail::stability_check(
          "cub", "continuous upper-bound constant C1", cub_c));
    if (detail::selected(cfg, "dub"))
      report.checks.push_back(detail::stability_check(
          "dub", "discrete upper-bound constant", dub_c));
    if (detail::selected(cfg, "diseff"))
      report.checks.push_back(detail::stability_check(
          "diseff", "discrete efficiency constant", diseff_c));
    if (detail::selected(cfg, "conee"))
      report.checks.push_back(detail::stability_check(
          "conee", "estimator continuity beta", conee_beta));
    if (detail::selected(cfg, "lower"))
      report.checks.push_back(detail::stability_check(
          "lower", "lower-bound (efficiency) ratio", lower_c));
  }

  return report;
}

} // namespace hodgefem

#endif
