#ifndef HODGEFEM_ADAPT_HPP
#define HODGEFEM_ADAPT_HPP

#include "hodgefem/core.hpp"
#include "hodgefem/estimator.hpp"
#include "hodgefem/solver.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <vector>

namespace hodgefem {

// ---------------------------------------------------------------------------
// Marking
// ---------------------------------------------------------------------------

/// Minimal-cardinality Doerfler set: smallest set of triangles whose
/// indicators sum to at least theta * total, built by descending sort with
/// ties broken by smaller triangle id. Returned sorted by id.
inline MarkedSet dorfler_mark(const IndicatorField& field, double theta) {
  if (field.total_eta_sq <= 0.0)
    throw ZeroEstimator("estimator is zero; nothing to mark");
  const int nt = static_cast<int>(field.eta_sq.size());
  std::vector<int> order(nt);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (field.eta_sq[a] != field.eta_sq[b])
      return field.eta_sq[a] > field.eta_sq[b];
    return a < b;
  });
  double target = theta * field.total_eta_sq;
  double acc = 0.0;
  MarkedSet marked;
  for (int id : order) {
    if (acc >= target) break;
    if (field.eta_sq[id] <= 0.0) break;
    marked.push_back(id);
    acc += field.eta_sq[id];
  }
  std::sort(marked.begin(), marked.end());
  return marked;
}

// ---------------------------------------------------------------------------
// AMFEM driver
// ---------------------------------------------------------------------------

struct AmfemConfig {
  double theta = 0.5;
  double epsilon = 1e-3;     // target on eta
  int max_iter = 40;
  double delta = 0.1;
  double beta = -1.0;        // < 0: derive from the measured reliability ratio
  std::string surface_name = "sphere";
  std::string mesh_preset = "icosahedron";
  std::string case_name = "y1";
  int quad_degree = 4;       // mass matrices and estimator residuals
  int ref_quad_degree = 6;   // reference errors
  double solver_tol = 1e-10;
  long tri_budget = 2000000;
  bool keep_meshes = false;
  bool compute_reference = true;

  void validate() const {
    if (!(theta > 0.0 && theta < 1.0))
      throw ConfigError("theta must lie in (0,1)");
    if (!(epsilon > 0.0)) throw ConfigError("eps must be positive");
    if (max_iter < 1) throw ConfigError("max_iter must be >= 1");
    if (quad_degree < 1 || quad_degree > 6 || ref_quad_degree < 1 ||
        ref_quad_degree > 6)
      throw ConfigError("quadrature degrees must lie in [1,6]");
    if (!(solver_tol >= 1e-14 && solver_tol <= 1e-6))
      throw ConfigError("solver.tol must lie in [1e-14, 1e-6]");
  }
};

struct AmfemIteration {
  int k = 0;
  int n_tri = 0, n_edges = 0, n_dofs = 0;
  double eta_sq = 0.0;
  double osc_sq = 0.0;
  double osc_hat_sq = std::numeric_limits<double>::quiet_NaN(); // retroactive
  double err_sq = std::numeric_limits<double>::quiet_NaN();
  double E_sq = std::numeric_limits<double>::quiet_NaN();       // retroactive
  int marked_count = 0;
  double wall_time = 0.0;

  double quasi_error(double delta, double beta) const {
    return (1.0 - delta) * err_sq + beta * eta_sq;
  }
};

struct AmfemRun {
  std::vector<AmfemIteration> history;
  std::vector<SurfaceMesh> meshes;     // filled when keep_meshes
  std::vector<FormVector> sigmas;      // likewise
  SurfaceMesh final_mesh;
  FormVector final_sigma;
  FormVector final_u;
  int exit_code = 0; // 0: eta <= eps, 2: max_iter reached
};

/// SOLVE -> ESTIMATE -> MARK -> REFINE with retroactive bookkeeping of
/// E_k = ||sigma_{k+1} - sigma_k||^2 and o^_k = osc^2(f_{k+1}, T_k).
/// `initial` overrides the preset starting mesh (APPROX entry point).
inline AmfemRun amfem_run(const AmfemConfig& config,
                          const SurfaceMesh* initial = nullptr) {
  config.validate();
  ImplicitSurface surface = ImplicitSurface::from_name(config.surface_name);
  ManufacturedSolution mcase = manufactured_solution(config.case_name);
  QuadratureRule quad = quadrature_rule(config.quad_degree);
  QuadratureRule ref_quad = quadrature_rule(config.ref_quad_degree);

  SurfaceMesh mesh = initial ? *initial
                             : build_initial(config.surface_name,
                                             config.mesh_preset);

  // B-reduce the data once, on a refined copy of the starting mesh
  ScalarField f_reduced;
  {
    SurfaceMesh probe = uniform_refine(mesh, 2);
    HarmonicSplit split =
        harmonic_component_top(probe, surface, mcase.f_density, ref_quad);
    f_reduced = split.residual;
  }

  AmfemRun run;
  SurfaceMesh prev_mesh;
  Eigen::VectorXd prev_sigma;
  bool have_prev = false;

  for (int k = 0; k <= config.max_iter; ++k) {
    auto tic = std::chrono::steady_clock::now();
    MixedSystem sys = assemble_mixed(mesh, surface, f_reduced, quad);
    MixedSolution sol = solve_mixed(sys, config.solver_tol);
    IndicatorField field =
        element_indicators(mesh, surface, sol.sigma, f_reduced, quad);

    AmfemIteration it;
    it.k = k;
    it.n_tri = mesh.n_tris();
    it.n_edges = mesh.n_edges();
    it.n_dofs = sys.n1 + sys.n2 + 1;
    it.eta_sq = field.total_eta_sq;
    it.osc_sq = field.total_osc_sq;
    if (config.compute_reference) {
      double e = reference_error(mesh, surface, sol.sigma, mcase.sigma_field,
                                 ref_quad);
      it.err_sq = e * e;
    }

    if (have_prev) {
      std::vector<int> pm;
      is_refinement_of(mesh, prev_mesh, &pm);
      FormVector prev_on_fine;
      {
        FormVector tmp;
        tmp.degree = 1;
        tmp.coefficients = prev_sigma;
        prev_on_fine = prolong_edgeform(prev_mesh, tmp, mesh, pm);
      }
      Eigen::VectorXd d = sol.sigma.coefficients - prev_on_fine.coefficients;
      run.history.back().E_sq = d.dot(sys.M1 * d);
      FormVector f_here;
      f_here.degree = 2;
      f_here.coefficients =
          sys.F.cwiseQuotient(Eigen::VectorXd(sys.M2.diagonal()));
      run.history.back().osc_hat_sq =
          oscillation_nested(prev_mesh, mesh, f_here);
    }

    bool done = std::sqrt(field.total_eta_sq) <= config.epsilon;
    MarkedSet marked;
    if (!done && k < config.max_iter) {
      try {
        marked = dorfler_mark(field, config.theta);
      } catch (const ZeroEstimator&) {
        done = true;
      }
    }
    it.marked_count = static_cast<int>(marked.size());
    it.wall_time = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - tic)
                       .count();
    run.history.push_back(it);
    if (config.keep_meshes) {
      run.meshes.push_back(mesh);
      run.sigmas.push_back(sol.sigma);
    }
    run.final_mesh = mesh;
    run.final_sigma = sol.sigma;
    run.final_u = sol.u;

    if (done) {
      run.exit_code = 0;
      return run;
    }
    if (k == config.max_iter || mesh.n_tris() > config.tri_budget) break;

    prev_mesh = mesh;
    prev_sigma = sol.sigma.coefficients;
    have_prev = true;
    mesh = bisect(mesh, marked);
  }
  run.exit_code = 2;
  return run;
}

// ---------------------------------------------------------------------------
// Data approximation (greedy oscillation reduction)
// ---------------------------------------------------------------------------

struct ApproxResult {
  SurfaceMesh mesh;
  double osc = 0.0;
  long added_tris = 0;
};

/// Greedy stand-in for the optimal data-approximation routine: Doerfler-mark
/// the per-element oscillation with theta = 0.5 and bisect until the total
/// oscillation drops below epsilon.
inline ApproxResult approx_data(const ScalarField& f_density_on_M,
                                const ImplicitSurface& surface,
                                const SurfaceMesh& mesh0, double epsilon,
                                long tri_cap = 500000, int quad_degree = 4) {
  if (!(epsilon > 0.0)) throw ConfigError("approx_data needs epsilon > 0");
  QuadratureRule quad = quadrature_rule(quad_degree);
  SurfaceMesh mesh = mesh0;
  const long n0 = mesh0.n_tris();
  while (true) {
    std::vector<double> osc_sq;
    double total = 0.0;
    oscillation(mesh, surface, f_density_on_M, quad, osc_sq, total);
    if (std::sqrt(total) <= epsilon) {
      return {mesh, std::sqrt(total), mesh.n_tris() - n0};
    }
    if (mesh.n_tris() > tri_cap)
      throw BudgetExceeded("approx_data exceeded triangle cap");
    IndicatorField fake;
    fake.eta_sq = osc_sq;
    fake.total_eta_sq = total;
    MarkedSet marked = dorfler_mark(fake, 0.5);
    mesh = bisect(mesh, marked);
  }
}

// ---------------------------------------------------------------------------
// Contraction and rate reporting
// ---------------------------------------------------------------------------

struct ContractionReport {
  std::vector<double> alpha;            // Q_{k+1} / Q_k
  std::vector<double> lemma_residual;   // beta(1-lambda theta) eta_k + E_k + o^_k - beta eta_{k+1}
  double geometric_mean_alpha = 0.0;
  double beta_used = 0.0;
  double lambda = 1.0 - std::pow(2.0, -0.5);
  int violations = 0;
};

/// Quasi-error contraction factors along a run. When beta < 0 the measured
/// reliability ratio max(e^2/eta^2) is used.
inline ContractionReport contraction_report(
    const std::vector<AmfemIteration>& history, double delta, double beta,
    double theta) {
  for (const auto& it : history)
    if (std::isnan(it.err_sq))
      throw MissingError("contraction report needs reference errors");
  ContractionReport rep;
  if (beta < 0) {
    beta = 0.0;
    for (const auto& it : history)
      if (it.eta_sq > 0) beta = std::max(beta, it.err_sq / it.eta_sq);
    if (beta == 0.0) beta = 1.0;
  }
  rep.beta_used = beta;
  double log_sum = 0.0;
  int count = 0;
  for (std::size_t k = 0; k + 1 < history.size(); ++k) {
    double qk = history[k].quasi_error(delta, beta);
    double qk1 = history[k + 1].quasi_error(delta, beta);
    double a = qk > 0 ? qk1 / qk : 1.0;
    rep.alpha.push_back(a);
    if (a > 0) {
      log_sum += std::log(a);
      ++count;
    }
    double ohat = std::isnan(history[k].osc_hat_sq) ? 0.0
                                                    : history[k].osc_hat_sq;
    double Ek = std::isnan(history[k].E_sq) ? 0.0 : history[k].E_sq;
    rep.lemma_residual.push_back(beta * (1.0 - rep.lambda * theta) *
                                     history[k].eta_sq +
                                 Ek + ohat - beta * history[k + 1].eta_sq);
    if (a > 1.0) ++rep.violations;
  }
  rep.geometric_mean_alpha = count ? std::exp(log_sum / count) : 1.0;
  return rep;
}

/// Least-squares exponent s of value ~ (#T - #T0)^{-s}; the first
/// `skip` points are dropped.
inline double rate_fit(const std::vector<double>& sizes,
                       const std::vector<double>& values, int skip = 2) {
  std::vector<double> x, y;
  for (std::size_t i = skip; i < sizes.size(); ++i) {
    if (sizes[i] > 0 && values[i] > 0) {
      x.push_back(std::log(sizes[i]));
      y.push_back(std::log(values[i]));
    }
  }
  if (x.size() < 3) throw InsufficientData("rate fit needs >= 5 iterations");
  double n = static_cast<double>(x.size());
  double sx = std::accumulate(x.begin(), x.end(), 0.0);
  double sy = std::accumulate(y.begin(), y.end(), 0.0);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return -slope;
}

/// Rate of the reference error (use_eta = false) or the estimator.
inline double rate_fit(const std::vector<AmfemIteration>& history, long n_t0,
                       bool use_eta, int skip = 2) {
  if (history.size() < 5)
    throw InsufficientData("rate fit needs >= 5 iterations");
  std::vector<double> sizes, values;
  for (const auto& it : history) {
    double v = use_eta ? std::sqrt(it.eta_sq) : std::sqrt(it.err_sq);
    sizes.push_back(static_cast<double>(it.n_tri - n_t0));
    values.push_back(v);
  }
  return rate_fit(sizes, values, skip);
}

} // namespace hodgefem

#endif
