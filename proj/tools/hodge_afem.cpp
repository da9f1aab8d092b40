// Command-line front end: adaptive runs, rate studies, the invariant
// verification suite, and mesh generation/export.

#include <hodgefem/adapt.hpp>
#include <hodgefem/io.hpp>
#include <hodgefem/verify.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <string>

namespace {

using namespace hodgefem;

void apply_thread_cap() {
  if (const char* env = std::getenv("HODGE_AFEM_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) Eigen::setNbThreads(n);
  }
}

/// Applies a parsed key=value config to `target` through a table of known
/// keys; unknown keys are rejected by name.
struct KeyTable {
  std::map<std::string, std::function<void(const std::string&)>> setters;

  void apply(const std::map<std::string, std::string>& kv) const {
    for (const auto& [key, value] : kv) {
      auto it = setters.find(key);
      if (it == setters.end()) throw ConfigError("unknown config key: " + key);
      try {
        it->second(value);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception&) {
        throw ConfigError("bad value for key '" + key + "': " + value);
      }
    }
  }
};

struct RunOptions {
  AmfemConfig amfem;
  std::string out_dir = ".";
  bool snapshots = false;
  std::string mesh_format = "off";
};

KeyTable run_key_table(RunOptions& o) {
  KeyTable t;
  t.setters["case"] = [&](const std::string& v) { o.amfem.case_name = v; };
  t.setters["surface"] = [&](const std::string& v) { o.amfem.surface_name = v; };
  t.setters["mesh"] = [&](const std::string& v) { o.amfem.mesh_preset = v; };
  t.setters["theta"] = [&](const std::string& v) { o.amfem.theta = std::stod(v); };
  t.setters["eps"] = [&](const std::string& v) { o.amfem.epsilon = std::stod(v); };
  t.setters["max_iter"] = [&](const std::string& v) { o.amfem.max_iter = std::stoi(v); };
  t.setters["delta"] = [&](const std::string& v) { o.amfem.delta = std::stod(v); };
  t.setters["beta"] = [&](const std::string& v) { o.amfem.beta = std::stod(v); };
  t.setters["quad_degree"] = [&](const std::string& v) { o.amfem.quad_degree = std::stoi(v); };
  t.setters["ref_quad_degree"] = [&](const std::string& v) { o.amfem.ref_quad_degree = std::stoi(v); };
  t.setters["solver_tol"] = [&](const std::string& v) { o.amfem.solver_tol = std::stod(v); };
  t.setters["tri_budget"] = [&](const std::string& v) { o.amfem.tri_budget = std::stol(v); };
  t.setters["out"] = [&](const std::string& v) { o.out_dir = v; };
  t.setters["snapshots"] = [&](const std::string& v) { o.snapshots = (v == "1" || v == "true"); };
  t.setters["mesh_format"] = [&](const std::string& v) { o.mesh_format = v; };
  return t;
}

int cmd_run(RunOptions& o) {
  o.amfem.keep_meshes = o.snapshots;
  AmfemRun run = amfem_run(o.amfem);
  std::filesystem::create_directories(o.out_dir);
  std::filesystem::path out(o.out_dir);
  write_history_csv(run.history, (out / "history.csv").string());
  write_mesh(run.final_mesh, (out / ("final." + o.mesh_format)).string(),
             o.amfem.surface_name);
  write_form(run.final_sigma, (out / "sigma.json").string());
  write_form(run.final_u, (out / "u.json").string());
  if (o.snapshots)
    for (std::size_t i = 0; i < run.meshes.size(); ++i)
      write_mesh(run.meshes[i],
                 (out / ("mesh_" + std::to_string(i) + "." + o.mesh_format))
                     .string(),
                 o.amfem.surface_name);

  std::map<std::string, double> constants;
  bool have_err = !run.history.empty() && !std::isnan(run.history[0].err_sq);
  if (have_err) {
    ContractionReport rep = contraction_report(run.history, o.amfem.delta,
                                               o.amfem.beta, o.amfem.theta);
    constants["beta_used"] = rep.beta_used;
    constants["alpha_geometric_mean"] = rep.geometric_mean_alpha;
    constants["alpha_violations"] = rep.violations;
    double rel = 0.0, eff = 0.0;
    for (const auto& it : run.history) {
      if (it.eta_sq > 0) rel = std::max(rel, it.err_sq / it.eta_sq);
      if (it.err_sq + it.osc_sq > 0)
        eff = std::max(eff, it.eta_sq / (it.err_sq + it.osc_sq));
    }
    constants["reliability_max"] = rel;
    constants["efficiency_max"] = eff;
  }
  long n0 = run.history.empty() ? 0 : run.history.front().n_tri;
  constants["closure_constant"] =
      run.final_mesh.cumulative_marked > 0
          ? static_cast<double>(run.final_mesh.n_tris() - n0) /
                static_cast<double>(run.final_mesh.cumulative_marked)
          : 0.0;
  try {
    constants["rate_s_eta"] = rate_fit(run.history, 0, true);
    if (have_err) constants["rate_s_err"] = rate_fit(run.history, 0, false);
  } catch (const InsufficientData&) {
    // short runs simply omit the fitted rates
  }
  write_constants_json(constants, (out / "constants.json").string());

  std::cout << "iterations: " << run.history.size()
            << "  final eta: " << fmt17(std::sqrt(run.history.back().eta_sq))
            << "  exit: " << run.exit_code << "\n";
  return run.exit_code;
}

struct StudyOptions {
  AmfemConfig amfem;
  int uniform_levels = 5;
  std::string out_dir = ".";
};

KeyTable study_key_table(StudyOptions& o) {
  KeyTable t;
  t.setters["case"] = [&](const std::string& v) { o.amfem.case_name = v; };
  t.setters["surface"] = [&](const std::string& v) { o.amfem.surface_name = v; };
  t.setters["mesh"] = [&](const std::string& v) { o.amfem.mesh_preset = v; };
  t.setters["theta"] = [&](const std::string& v) { o.amfem.theta = std::stod(v); };
  t.setters["max_iter"] = [&](const std::string& v) { o.amfem.max_iter = std::stoi(v); };
  t.setters["quad_degree"] = [&](const std::string& v) { o.amfem.quad_degree = std::stoi(v); };
  t.setters["tri_budget"] = [&](const std::string& v) { o.amfem.tri_budget = std::stol(v); };
  t.setters["levels"] = [&](const std::string& v) { o.uniform_levels = std::stoi(v); };
  t.setters["out"] = [&](const std::string& v) { o.out_dir = v; };
  return t;
}

int cmd_study(StudyOptions& o) {
  o.amfem.epsilon = 1e-12; // both series run to their budgets
  AmfemRun adaptive = amfem_run(o.amfem);

  ImplicitSurface surface = ImplicitSurface::from_name(o.amfem.surface_name);
  ManufacturedSolution mcase = manufactured_solution(o.amfem.case_name);
  QuadratureRule quad = quadrature_rule(o.amfem.quad_degree);
  QuadratureRule ref_quad = quadrature_rule(o.amfem.ref_quad_degree);

  std::vector<RatePoint> rows;
  auto push_series = [&](const std::string& name,
                         const std::vector<AmfemIteration>& hist) {
    double s_err = 0.0;
    try {
      s_err = rate_fit(hist, 0, false);
    } catch (const InsufficientData&) {
      throw InsufficientData("series '" + name +
                             "' too short for a rate fit; raise max_iter or levels");
    }
    for (const auto& it : hist) {
      RatePoint r;
      r.series = name;
      r.level = it.k;
      r.n_tri = it.n_tri;
      r.eta = std::sqrt(it.eta_sq);
      r.err = std::sqrt(it.err_sq);
      r.fitted_s = s_err;
      rows.push_back(r);
    }
  };
  push_series("adaptive", adaptive.history);

  // uniform series: same solve/estimate path, all triangles marked
  std::vector<AmfemIteration> uniform_hist;
  {
    SurfaceMesh mesh = build_initial(o.amfem.surface_name, o.amfem.mesh_preset);
    ScalarField f_reduced;
    {
      SurfaceMesh probe = uniform_refine(mesh, 2);
      HarmonicSplit split =
          harmonic_component_top(probe, surface, mcase.f_density, ref_quad);
      f_reduced = split.residual;
    }
    for (int level = 0; level < o.uniform_levels; ++level) {
      MixedSystem sys = assemble_mixed(mesh, surface, f_reduced, quad);
      MixedSolution sol = solve_mixed(sys, o.amfem.solver_tol);
      IndicatorField field =
          element_indicators(mesh, surface, sol.sigma, f_reduced, quad);
      AmfemIteration it;
      it.k = level;
      it.n_tri = mesh.n_tris();
      it.n_edges = mesh.n_edges();
      it.n_dofs = sys.n1 + sys.n2 + 1;
      it.eta_sq = field.total_eta_sq;
      it.osc_sq = field.total_osc_sq;
      double e = reference_error(mesh, surface, sol.sigma, mcase.sigma_field,
                                 ref_quad);
      it.err_sq = e * e;
      uniform_hist.push_back(it);
      if (level + 1 < o.uniform_levels) mesh = uniform_refine(mesh, 2);
    }
  }
  push_series("uniform", uniform_hist);

  std::filesystem::create_directories(o.out_dir);
  write_rates_csv(rows,
                  (std::filesystem::path(o.out_dir) / "rates.csv").string());
  std::cout << "adaptive fitted s: " << fmt17(rows.front().fitted_s)
            << "  uniform fitted s: " << fmt17(rows.back().fitted_s) << "\n";
  return 0;
}

int cmd_verify(VerifyConfig& vcfg) {
  VerifyReport report = verify_lemmas(vcfg);
  std::cout << std::left << std::setw(10) << "check" << std::setw(44) << "name"
            << std::setw(14) << "measured" << std::setw(14) << "cap"
            << "status\n";
  for (const auto& c : report.checks) {
    std::cout << std::left << std::setw(10) << c.id << std::setw(44) << c.name
              << std::setw(14) << std::setprecision(4) << c.measured
              << std::setw(14) << c.cap << (c.pass ? "pass" : "FAIL");
    if (!c.note.empty()) std::cout << "  (" << c.note << ")";
    std::cout << "\n";
  }
  return report.all_pass() ? 0 : 1;
}

struct MeshOptions {
  std::string surface = "sphere";
  std::string preset = "icosahedron";
  std::string input;
  std::string output = "mesh.off";
  int refine = 0;
};

int cmd_mesh(MeshOptions& o) {
  SurfaceMesh mesh =
      o.input.empty() ? build_initial(o.surface, o.preset) : read_mesh(o.input);
  if (o.refine > 0) mesh = uniform_refine(mesh, o.refine);
  write_mesh(mesh, o.output, o.surface);
  std::cout << o.output << ": " << mesh.n_vertices() << " vertices, "
            << mesh.n_tris() << " triangles, " << mesh.n_edges() << " edges\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  apply_thread_cap();
  CLI::App app{"adaptive mixed solver for the Hodge Laplacian on implicit surfaces"};
  app.require_subcommand(1);

  RunOptions ro;
  StudyOptions so;
  VerifyConfig vo;
  MeshOptions mo;
  std::string run_config_file, study_config_file;
  std::string checks_csv;

  auto* run = app.add_subcommand("run", "one adaptive run");
  run->add_option("--config", run_config_file, "key=value config file");
  run->add_option("--case", ro.amfem.case_name, "manufactured case");
  run->add_option("--surface", ro.amfem.surface_name, "implicit surface");
  run->add_option("--mesh", ro.amfem.mesh_preset, "initial mesh preset");
  run->add_option("--theta", ro.amfem.theta, "marking parameter in (0,1)");
  run->add_option("--eps", ro.amfem.epsilon, "target estimator value");
  run->add_option("--max-iter", ro.amfem.max_iter, "iteration cap");
  run->add_option("--delta", ro.amfem.delta, "quasi-error weight");
  run->add_option("--beta", ro.amfem.beta, "quasi-error estimator weight (<0: measured)");
  run->add_option("--quad-degree", ro.amfem.quad_degree, "assembly quadrature degree");
  run->add_option("--ref-quad-degree", ro.amfem.ref_quad_degree, "reference quadrature degree");
  run->add_option("--solver-tol", ro.amfem.solver_tol, "relative residual tolerance");
  run->add_option("--tri-budget", ro.amfem.tri_budget, "triangle budget");
  run->add_option("--out", ro.out_dir, "output directory");
  run->add_flag("--snapshots", ro.snapshots, "export per-iteration meshes");
  run->add_option("--mesh-format", ro.mesh_format, "off or obj");

  auto* study = app.add_subcommand("study", "adaptive vs uniform rate study");
  study->add_option("--config", study_config_file, "key=value config file");
  study->add_option("--case", so.amfem.case_name, "manufactured case");
  study->add_option("--surface", so.amfem.surface_name, "implicit surface");
  study->add_option("--mesh", so.amfem.mesh_preset, "initial mesh preset");
  study->add_option("--theta", so.amfem.theta, "marking parameter");
  study->add_option("--max-iter", so.amfem.max_iter, "adaptive iteration count");
  study->add_option("--levels", so.uniform_levels, "uniform refinement levels");
  study->add_option("--tri-budget", so.amfem.tri_budget, "triangle budget");
  study->add_option("--out", so.out_dir, "output directory");

  auto* verify = app.add_subcommand("verify", "invariant and constant checks");
  verify->add_option("--surface", vo.surface_name, "implicit surface");
  verify->add_option("--case", vo.case_name, "manufactured case");
  verify->add_option("--theta", vo.theta, "marking parameter for the ladder");
  verify->add_option("--iterations", vo.ladder_iterations, "ladder length");
  verify->add_option("--checks", checks_csv, "comma-separated subset of check ids");
  verify->add_option("--seed", vo.seed, "random seed");

  auto* meshc = app.add_subcommand("mesh", "generate / refine / export meshes");
  meshc->add_option("--surface", mo.surface, "implicit surface");
  meshc->add_option("--preset", mo.preset, "initial mesh preset");
  meshc->add_option("--input", mo.input, "import an existing mesh instead");
  meshc->add_option("--refine", mo.refine, "uniform refinement rounds");
  meshc->add_option("--output", mo.output, "output path (.off or .obj)");

  // remember flag values, apply the config file, then re-apply flags (flags win)
  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (!run_config_file.empty()) {
        RunOptions file_opts;
        run_key_table(file_opts).apply(parse_config_file(run_config_file));
        RunOptions merged = file_opts;
        // flags win: copy back any flag the user actually passed
        if (run->count("--case")) merged.amfem.case_name = ro.amfem.case_name;
        if (run->count("--surface")) merged.amfem.surface_name = ro.amfem.surface_name;
        if (run->count("--mesh")) merged.amfem.mesh_preset = ro.amfem.mesh_preset;
        if (run->count("--theta")) merged.amfem.theta = ro.amfem.theta;
        if (run->count("--eps")) merged.amfem.epsilon = ro.amfem.epsilon;
        if (run->count("--max-iter")) merged.amfem.max_iter = ro.amfem.max_iter;
        if (run->count("--delta")) merged.amfem.delta = ro.amfem.delta;
        if (run->count("--beta")) merged.amfem.beta = ro.amfem.beta;
        if (run->count("--quad-degree")) merged.amfem.quad_degree = ro.amfem.quad_degree;
        if (run->count("--ref-quad-degree")) merged.amfem.ref_quad_degree = ro.amfem.ref_quad_degree;
        if (run->count("--solver-tol")) merged.amfem.solver_tol = ro.amfem.solver_tol;
        if (run->count("--tri-budget")) merged.amfem.tri_budget = ro.amfem.tri_budget;
        if (run->count("--out")) merged.out_dir = ro.out_dir;
        if (run->count("--snapshots")) merged.snapshots = ro.snapshots;
        if (run->count("--mesh-format")) merged.mesh_format = ro.mesh_format;
        ro = merged;
      }
      return cmd_run(ro);
    }
    if (study->parsed()) {
      if (!study_config_file.empty()) {
        StudyOptions file_opts;
        study_key_table(file_opts).apply(parse_config_file(study_config_file));
        StudyOptions merged = file_opts;
        if (study->count("--case")) merged.amfem.case_name = so.amfem.case_name;
        if (study->count("--surface")) merged.amfem.surface_name = so.amfem.surface_name;
        if (study->count("--mesh")) merged.amfem.mesh_preset = so.amfem.mesh_preset;
        if (study->count("--theta")) merged.amfem.theta = so.amfem.theta;
        if (study->count("--max-iter")) merged.amfem.max_iter = so.amfem.max_iter;
        if (study->count("--levels")) merged.uniform_levels = so.uniform_levels;
        if (study->count("--tri-budget")) merged.amfem.tri_budget = so.amfem.tri_budget;
        if (study->count("--out")) merged.out_dir = so.out_dir;
        so = merged;
      }
      return cmd_study(so);
    }
    if (verify->parsed()) {
      if (!checks_csv.empty()) {
        std::stringstream ss(checks_csv);
        std::string tok;
        while (std::getline(ss, tok, ','))
          if (!tok.empty()) vo.selected.insert(tok);
      }
      return cmd_verify(vo);
    }
    if (meshc->parsed()) return cmd_mesh(mo);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
