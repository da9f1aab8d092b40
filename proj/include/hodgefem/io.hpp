#ifndef HODGEFEM_IO_HPP
#define HODGEFEM_IO_HPP

#include "hodgefem/adapt.hpp"
#include "hodgefem/feec.hpp"
#include "hodgefem/mesh.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace hodgefem {

inline std::string fmt17(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Mesh export / import (OFF, OBJ) with a JSON sidecar for refinement metadata
// ---------------------------------------------------------------------------

/// Deterministic triangle order for exports: (generation, parent uid, child
/// index), then uid as a final tiebreak.
inline std::vector<int> canonical_order(const SurfaceMesh& mesh) {
  std::vector<int> order(mesh.n_tris());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    std::int64_t pa = mesh.genealogy[mesh.uid[a]];
    std::int64_t pb = mesh.genealogy[mesh.uid[b]];
    if (mesh.generation[a] != mesh.generation[b])
      return mesh.generation[a] < mesh.generation[b];
    if (pa != pb) return pa < pb;
    if (mesh.child_index[a] != mesh.child_index[b])
      return mesh.child_index[a] < mesh.child_index[b];
    return mesh.uid[a] < mesh.uid[b];
  });
  return order;
}

inline std::string meta_path_for(const std::string& mesh_path) {
  std::filesystem::path p(mesh_path);
  p.replace_extension();
  return p.string() + ".meta.json";
}

inline void write_mesh_meta(const SurfaceMesh& mesh,
                            const std::vector<int>& order,
                            const std::string& mesh_path,
                            const std::string& surface_name = "") {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["surface"] = surface_name;
  j["root_signature"] = mesh.root_signature;
  j["cumulative_marked"] = mesh.cumulative_marked;
  j["n_vertices"] = mesh.n_vertices();
  j["n_triangles"] = mesh.n_tris();
  std::vector<int> gen(mesh.n_tris()), child(mesh.n_tris());
  std::vector<std::int64_t> uid(mesh.n_tris());
  for (int i = 0; i < mesh.n_tris(); ++i) {
    gen[i] = mesh.generation[order[i]];
    uid[i] = mesh.uid[order[i]];
    child[i] = mesh.child_index[order[i]];
  }
  j["generation"] = gen;
  j["uid"] = uid;
  j["child_index"] = child;
  j["genealogy"] = mesh.genealogy;
  std::ofstream out(meta_path_for(mesh_path));
  if (!out) throw std::runtime_error("cannot write " + meta_path_for(mesh_path));
  out << j.dump(2) << "\n";
}

inline void write_off(const SurfaceMesh& mesh, const std::string& path,
                      const std::string& surface_name = "") {
  std::vector<int> order = canonical_order(mesh);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "OFF\n"
      << mesh.n_vertices() << " " << mesh.n_tris() << " " << mesh.n_edges()
      << "\n";
  for (const auto& v : mesh.vertices)
    out << fmt17(v[0]) << " " << fmt17(v[1]) << " " << fmt17(v[2]) << "\n";
  for (int i : order)
    out << "3 " << mesh.tris[i][0] << " " << mesh.tris[i][1] << " "
        << mesh.tris[i][2] << "\n";
  out.close();
  write_mesh_meta(mesh, order, path, surface_name);
}

inline void write_obj(const SurfaceMesh& mesh, const std::string& path,
                      const std::string& surface_name = "") {
  std::vector<int> order = canonical_order(mesh);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& v : mesh.vertices)
    out << "v " << fmt17(v[0]) << " " << fmt17(v[1]) << " " << fmt17(v[2])
        << "\n";
  for (int i : order)
    out << "f " << mesh.tris[i][0] + 1 << " " << mesh.tris[i][1] + 1 << " "
        << mesh.tris[i][2] + 1 << "\n";
  out.close();
  write_mesh_meta(mesh, order, path, surface_name);
}

namespace detail {

inline void apply_mesh_meta(SurfaceMesh& mesh, const std::string& mesh_path) {
  std::ifstream in(meta_path_for(mesh_path));
  if (!in) {
    // no sidecar: treat the file as a fresh root triangulation
    mesh.generation.assign(mesh.n_tris(), 0);
    mesh.uid.resize(mesh.n_tris());
    mesh.child_index.assign(mesh.n_tris(), 0);
    mesh.genealogy.assign(mesh.n_tris(), -1);
    for (int t = 0; t < mesh.n_tris(); ++t) mesh.uid[t] = t;
    mesh.root_signature = detail::next_root_signature();
    init_refinement_edges(mesh);
    return;
  }
  nlohmann::json j;
  in >> j;
  mesh.root_signature = j.at("root_signature").get<std::int64_t>();
  mesh.cumulative_marked = j.at("cumulative_marked").get<std::int64_t>();
  mesh.generation = j.at("generation").get<std::vector<int>>();
  mesh.uid = j.at("uid").get<std::vector<std::int64_t>>();
  mesh.child_index = j.at("child_index").get<std::vector<int>>();
  mesh.genealogy = j.at("genealogy").get<std::vector<std::int64_t>>();
  if (static_cast<int>(mesh.generation.size()) != mesh.n_tris())
    throw std::runtime_error("mesh metadata does not match " + mesh_path);
}

} // namespace detail

inline SurfaceMesh read_off(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string magic;
  in >> magic;
  if (magic != "OFF") throw std::runtime_error(path + ": not an OFF file");
  int nv, nt, ne;
  in >> nv >> nt >> ne;
  SurfaceMesh mesh;
  mesh.vertices.resize(nv);
  for (auto& v : mesh.vertices) in >> v[0] >> v[1] >> v[2];
  mesh.tris.resize(nt);
  for (auto& t : mesh.tris) {
    int k;
    in >> k >> t[0] >> t[1] >> t[2];
    if (k != 3) throw std::runtime_error(path + ": non-triangle face");
  }
  if (!in) throw std::runtime_error(path + ": truncated OFF file");
  detail::apply_mesh_meta(mesh, path);
  mesh.build_edges();
  return mesh;
}

inline SurfaceMesh read_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  SurfaceMesh mesh;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 v;
      ls >> v[0] >> v[1] >> v[2];
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::array<int, 3> t;
      for (int i = 0; i < 3; ++i) {
        std::string tok;
        ls >> tok;
        t[i] = std::stoi(tok.substr(0, tok.find('/'))) - 1;
      }
      mesh.tris.push_back(t);
    }
  }
  detail::apply_mesh_meta(mesh, path);
  mesh.build_edges();
  return mesh;
}

inline void write_mesh(const SurfaceMesh& mesh, const std::string& path,
                       const std::string& surface_name = "") {
  std::filesystem::path p(path);
  if (p.extension() == ".obj")
    write_obj(mesh, path, surface_name);
  else if (p.extension() == ".off")
    write_off(mesh, path, surface_name);
  else
    throw ConfigError("unsupported mesh format: " + p.extension().string());
}

inline SurfaceMesh read_mesh(const std::string& path) {
  std::filesystem::path p(path);
  if (p.extension() == ".obj") return read_obj(path);
  if (p.extension() == ".off") return read_off(path);
  throw ConfigError("unsupported mesh format: " + p.extension().string());
}

// ---------------------------------------------------------------------------
// Discrete form serialization
// ---------------------------------------------------------------------------

inline void write_form(const FormVector& form, const std::string& path) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["degree"] = form.degree;
  j["mesh_signature"] = form.mesh_signature;
  std::vector<std::string> coeffs(form.coefficients.size());
  for (Eigen::Index i = 0; i < form.coefficients.size(); ++i)
    coeffs[i] = fmt17(form.coefficients[i]);
  j["coefficients"] = coeffs;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

inline FormVector read_form(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  in >> j;
  FormVector f;
  f.degree = j.at("degree").get<int>();
  f.mesh_signature = j.at("mesh_signature").get<std::int64_t>();
  auto coeffs = j.at("coefficients");
  f.coefficients.resize(static_cast<Eigen::Index>(coeffs.size()));
  for (std::size_t i = 0; i < coeffs.size(); ++i)
    f.coefficients[static_cast<Eigen::Index>(i)] =
        coeffs[i].is_string() ? std::stod(coeffs[i].get<std::string>())
                              : coeffs[i].get<double>();
  return f;
}

// ---------------------------------------------------------------------------
// Run outputs: history.csv, rates.csv, constants.json
// ---------------------------------------------------------------------------

inline void write_history_csv(const std::vector<AmfemIteration>& history,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "schema_version,k,n_tri,n_edges,n_dofs,eta_sq,osc_sq,osc_hat_sq,"
         "err_sq,E_sq,marked,wall_time\n";
  for (const auto& it : history) {
    out << 1 << "," << it.k << "," << it.n_tri << "," << it.n_edges << ","
        << it.n_dofs << "," << fmt17(it.eta_sq) << "," << fmt17(it.osc_sq)
        << "," << fmt17(it.osc_hat_sq) << "," << fmt17(it.err_sq) << ","
        << fmt17(it.E_sq) << "," << it.marked_count << ","
        << fmt17(it.wall_time) << "\n";
  }
}

struct RatePoint {
  std::string series;
  int level = 0;
  long n_tri = 0;
  double eta = 0.0;
  double err = 0.0;
  double fitted_s = 0.0;
};

inline void write_rates_csv(const std::vector<RatePoint>& rows,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "schema_version,series,level,n_tri,eta,err,fitted_s\n";
  for (const auto& r : rows)
    out << 1 << "," << r.series << "," << r.level << "," << r.n_tri << ","
        << fmt17(r.eta) << "," << fmt17(r.err) << "," << fmt17(r.fitted_s)
        << "\n";
}

inline void write_constants_json(const std::map<std::string, double>& values,
                                 const std::string& path) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  for (const auto& [k, v] : values) j[k] = v;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Flat key=value configuration files
// ---------------------------------------------------------------------------

/// Parses `key = value` lines; '#' starts a comment, blank lines ignored.
/// Duplicate keys: the last one wins (flags are applied the same way).
inline std::map<std::string, std::string> parse_config_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected key=value, got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
    kv[key] = value;
  }
  return kv;
}

} // namespace hodgefem

#endif
