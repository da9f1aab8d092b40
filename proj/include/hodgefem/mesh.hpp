#ifndef HODGEFEM_MESH_HPP
#define HODGEFEM_MESH_HPP

#include "hodgefem/core.hpp"
#include "hodgefem/geometry.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <unordered_map>
#include <vector>

namespace hodgefem {

using MarkedSet = std::vector<int>; // sorted, deduplicated triangle ids

namespace detail {
inline std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}
inline std::int64_t next_root_signature() {
  static std::atomic<std::int64_t> counter{1};
  return counter.fetch_add(1);
}
} // namespace detail

/// Conforming oriented triangulation of the fixed flat approximating surface.
/// Refinement is newest-vertex bisection with conformity closure; triangles
/// carry a persistent id so genealogy survives across mesh snapshots.
struct SurfaceMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> tris; // oriented; refinement edge is (v0, v1)
  std::vector<int> generation;
  std::vector<std::int64_t> uid;        // persistent triangle id
  std::vector<int> child_index;         // 0/1 within parent, 0 for roots

  // genealogy[u] = parent uid of triangle u, -1 for root triangles
  std::vector<std::int64_t> genealogy;
  std::int64_t root_signature = 0;
  std::int64_t cumulative_marked = 0;

  // derived connectivity
  std::vector<std::array<int, 2>> edges;      // lo < hi, sorted lexicographically
  std::vector<std::array<int, 2>> edge_tris;  // the two incident triangles

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_tris() const { return static_cast<int>(tris.size()); }
  int n_edges() const { return static_cast<int>(edges.size()); }

  const Vec3& point(int t, int local) const { return vertices[tris[t][local]]; }

  TriangleFrame frame(int t) const {
    return TriangleFrame(point(t, 0), point(t, 1), point(t, 2));
  }

  double area(int t) const {
    return 0.5 * (point(t, 1) - point(t, 0))
                     .cross(point(t, 2) - point(t, 0))
                     .norm();
  }

  Vec3 centroid(int t) const {
    return (point(t, 0) + point(t, 1) + point(t, 2)) / 3.0;
  }

  std::int64_t parent_uid(std::int64_t u) const { return genealogy[u]; }

  void build_edges() {
    std::map<std::array<int, 2>, std::array<int, 2>> acc;
    for (int t = 0; t < n_tris(); ++t) {
      for (int i = 0; i < 3; ++i) {
        int a = tris[t][i], b = tris[t][(i + 1) % 3];
        std::array<int, 2> key{std::min(a, b), std::max(a, b)};
        auto it = acc.find(key);
        if (it == acc.end())
          acc[key] = {t, -1};
        else
          it->second[1] = t;
      }
    }
    edges.clear();
    edge_tris.clear();
    edges.reserve(acc.size());
    for (const auto& [key, ts] : acc) {
      edges.push_back(key);
      edge_tris.push_back(ts);
    }
  }

  /// Closed oriented 2-manifold: every edge in exactly two triangles with
  /// opposite induced orientations; no hanging vertices by construction.
  bool check_manifold() const {
    std::map<std::array<int, 2>, int> directed;
    for (int t = 0; t < n_tris(); ++t) {
      for (int i = 0; i < 3; ++i) {
        int a = tris[t][i], b = tris[t][(i + 1) % 3];
        if (a == b) return false;
        directed[{a, b}]++;
      }
    }
    for (const auto& [e, count] : directed) {
      if (count != 1) return false;
      if (!directed.count({e[1], e[0]})) return false;
    }
    for (const auto& et : edge_tris)
      if (et[0] < 0 || et[1] < 0) return false;
    return true;
  }

  int euler_characteristic() const {
    return n_vertices() - n_edges() + n_tris();
  }
};

inline double element_diameter(const SurfaceMesh& mesh, int t) {
  double d01 = (mesh.point(t, 0) - mesh.point(t, 1)).norm();
  double d12 = (mesh.point(t, 1) - mesh.point(t, 2)).norm();
  double d20 = (mesh.point(t, 2) - mesh.point(t, 0)).norm();
  return std::max({d01, d12, d20});
}

/// min over triangles of inradius/diameter.
inline double shape_regularity(const SurfaceMesh& mesh) {
  double worst = std::numeric_limits<double>::infinity();
  for (int t = 0; t < mesh.n_tris(); ++t) {
    double a = (mesh.point(t, 1) - mesh.point(t, 2)).norm();
    double b = (mesh.point(t, 2) - mesh.point(t, 0)).norm();
    double c = (mesh.point(t, 0) - mesh.point(t, 1)).norm();
    double s = 0.5 * (a + b + c);
    double inradius = mesh.area(t) / s;
    worst = std::min(worst, inradius / element_diameter(mesh, t));
  }
  return worst;
}

namespace detail {

/// Rotate each triangle so that its refinement edge is (v0, v1).
/// Initialization: longest edge, ties broken by smallest opposite-vertex id.
inline void init_refinement_edges(SurfaceMesh& mesh) {
  for (auto& tri : mesh.tris) {
    double best = -1.0;
    int best_i = 0;
    for (int i = 0; i < 3; ++i) {
      int a = tri[i], b = tri[(i + 1) % 3], opp = tri[(i + 2) % 3];
      double len = (mesh.vertices[a] - mesh.vertices[b]).norm();
      if (len > best * (1.0 + 1e-12)) {
        best = len;
        best_i = i;
      } else if (len > best * (1.0 - 1e-12)) {
        int cur_opp = tri[(best_i + 2) % 3];
        if (opp < cur_opp) best_i = i;
      }
    }
    std::array<int, 3> rotated{tri[best_i], tri[(best_i + 1) % 3],
                               tri[(best_i + 2) % 3]};
    tri = rotated;
  }
}

inline void orient_outward_convex(SurfaceMesh& mesh) {
  for (auto& tri : mesh.tris) {
    Vec3 p0 = mesh.vertices[tri[0]], p1 = mesh.vertices[tri[1]],
         p2 = mesh.vertices[tri[2]];
    Vec3 n = (p1 - p0).cross(p2 - p0);
    Vec3 c = (p0 + p1 + p2) / 3.0;
    if (n.dot(c) < 0) std::swap(tri[1], tri[2]);
  }
}

} // namespace detail

inline SurfaceMesh build_initial(const std::string& surface_name,
                                 const std::string& preset) {
  SurfaceMesh mesh;
  if (preset == "icosahedron") {
    double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> raw = {
        {-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0},
        {0, -1, phi}, {0, 1, phi},  {0, -1, -phi}, {0, 1, -phi},
        {phi, 0, -1}, {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1}};
    for (auto& v : raw) mesh.vertices.push_back(v.normalized());
    mesh.tris = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                 {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                 {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                 {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    detail::orient_outward_convex(mesh);
  } else if (preset == "octahedron") {
    mesh.vertices = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                     {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    mesh.tris = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
                 {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
    detail::orient_outward_convex(mesh);
  } else if (preset.rfind("torus-grid", 0) == 0) {
    int n = 8, m = 8;
    auto pos = preset.find(':');
    if (pos != std::string::npos) {
      std::string dims = preset.substr(pos + 1);
      auto x = dims.find('x');
      if (x == std::string::npos)
        throw UnknownPreset("torus-grid wants n x m, got " + preset);
      n = std::stoi(dims.substr(0, x));
      m = std::stoi(dims.substr(x + 1));
    }
    ImplicitSurface torus = ImplicitSurface::from_name(surface_name);
    double R = 2.0, r = 0.5;
    {
      auto p = surface_name.find("R=");
      if (p != std::string::npos) R = std::stod(surface_name.substr(p + 2));
      p = surface_name.find("r=");
      if (p != std::string::npos) r = std::stod(surface_name.substr(p + 2));
    }
    auto vid = [&](int i, int j) { return (i % n) * m + (j % m); };
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) {
        double u = 2.0 * M_PI * i / n, v = 2.0 * M_PI * j / m;
        double rho = R + r * std::cos(v);
        mesh.vertices.emplace_back(rho * std::cos(u), rho * std::sin(u),
                                   r * std::sin(v));
      }
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) {
        // outward orientation for the standard torus parametrization
        mesh.tris.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
        mesh.tris.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
      }
    }
  } else {
    throw UnknownPreset("unknown mesh preset: " + preset);
  }

  detail::init_refinement_edges(mesh);
  mesh.generation.assign(mesh.n_tris(), 0);
  mesh.uid.resize(mesh.n_tris());
  mesh.child_index.assign(mesh.n_tris(), 0);
  mesh.genealogy.assign(mesh.n_tris(), -1);
  for (int t = 0; t < mesh.n_tris(); ++t) mesh.uid[t] = t;
  mesh.root_signature = detail::next_root_signature();
  mesh.build_edges();
  for (int t = 0; t < mesh.n_tris(); ++t) mesh.frame(t); // rejects degenerates
  return mesh;
}

namespace detail {

/// Mutable refinement workspace; compacted into a SurfaceMesh at the end.
struct BisectWork {
  SurfaceMesh mesh; // result under construction (triangle arrays grow)
  std::vector<bool> alive;
  std::unordered_map<std::uint64_t, std::array<int, 2>> edge_to_tris;
  std::unordered_map<std::uint64_t, int> midpoint;
  std::int64_t next_uid;
  long steps = 0;
  long step_budget = 0;

  explicit BisectWork(const SurfaceMesh& in) : mesh(in) {
    alive.assign(mesh.n_tris(), true);
    next_uid = static_cast<std::int64_t>(mesh.genealogy.size());
    for (int t = 0; t < mesh.n_tris(); ++t) attach(t);
  }

  void attach(int t) {
    for (int i = 0; i < 3; ++i) {
      auto key = edge_key(mesh.tris[t][i], mesh.tris[t][(i + 1) % 3]);
      auto it = edge_to_tris.find(key);
      if (it == edge_to_tris.end())
        edge_to_tris[key] = {t, -1};
      else if (it->second[0] < 0)
        it->second[0] = t;
      else
        it->second[1] = t;
    }
  }

  void detach(int t) {
    for (int i = 0; i < 3; ++i) {
      auto key = edge_key(mesh.tris[t][i], mesh.tris[t][(i + 1) % 3]);
      auto& ts = edge_to_tris[key];
      if (ts[0] == t) ts[0] = -1;
      if (ts[1] == t) ts[1] = -1;
    }
  }

  int neighbor_across_refedge(int t) const {
    auto key = edge_key(mesh.tris[t][0], mesh.tris[t][1]);
    const auto& ts = edge_to_tris.at(key);
    return ts[0] == t ? ts[1] : ts[0];
  }

  bool refedge_is(int t, std::uint64_t key) const {
    return edge_key(mesh.tris[t][0], mesh.tris[t][1]) == key;
  }

  /// Split t at its refinement edge (v0, v1); midpoint created on demand.
  void bisect_one(int t) {
    int p = mesh.tris[t][0], q = mesh.tris[t][1], o = mesh.tris[t][2];
    auto key = edge_key(p, q);
    int m;
    auto it = midpoint.find(key);
    if (it != midpoint.end()) {
      m = it->second;
    } else {
      m = mesh.n_vertices();
      mesh.vertices.push_back(0.5 * (mesh.vertices[p] + mesh.vertices[q]));
      midpoint[key] = m;
    }
    detach(t);
    alive[t] = false;
    int gen = mesh.generation[t] + 1;
    std::int64_t parent = mesh.uid[t];
    // children stored refinement-edge-first: (o,p) and (q,o)
    auto push_child = [&](std::array<int, 3> tri, int ci) {
      mesh.tris.push_back(tri);
      mesh.generation.push_back(gen);
      mesh.uid.push_back(next_uid);
      mesh.child_index.push_back(ci);
      mesh.genealogy.push_back(parent);
      alive.push_back(true);
      attach(mesh.n_tris() - 1);
      ++next_uid;
    };
    push_child({o, p, m}, 0);
    push_child({q, o, m}, 1);
  }

  /// Ensure triangle t is bisected, recursively making refinement edges
  /// compatible with neighbors first.
  void refine(int t) {
    std::vector<int> stack{t};
    while (!stack.empty()) {
      if (++steps > step_budget)
        throw std::logic_error("bisection closure exceeded step budget");
      int cur = stack.back();
      if (!alive[cur]) {
        stack.pop_back();
        continue;
      }
      auto key = edge_key(mesh.tris[cur][0], mesh.tris[cur][1]);
      int nb = neighbor_across_refedge(cur);
      if (nb >= 0 && !refedge_is(nb, key)) {
        stack.push_back(nb);
        continue;
      }
      bisect_one(cur);
      if (nb >= 0 && alive[nb]) bisect_one(nb);
      stack.pop_back();
    }
  }
};

} // namespace detail

/// Newest-vertex bisection of the marked triangles plus conformity closure.
/// Returns a new mesh; the input is untouched.
inline SurfaceMesh bisect(const SurfaceMesh& mesh, const MarkedSet& marked) {
  for (int id : marked)
    if (id < 0 || id >= mesh.n_tris())
      throw std::out_of_range("marked triangle id out of range");
  if (marked.empty()) return mesh;

  detail::BisectWork work(mesh);
  work.step_budget = 10L * (mesh.n_tris() + static_cast<long>(marked.size()) * 8 + 64);
  for (int id : marked)
    if (work.alive[id]) work.refine(id);

  SurfaceMesh out;
  out.vertices = std::move(work.mesh.vertices);
  out.genealogy = std::move(work.mesh.genealogy);
  out.root_signature = mesh.root_signature;
  out.cumulative_marked =
      mesh.cumulative_marked + static_cast<std::int64_t>(marked.size());
  for (int t = 0; t < work.mesh.n_tris(); ++t) {
    if (!work.alive[t]) continue;
    out.tris.push_back(work.mesh.tris[t]);
    out.generation.push_back(work.mesh.generation[t]);
    out.uid.push_back(work.mesh.uid[t]);
    out.child_index.push_back(work.mesh.child_index[t]);
  }
  out.build_edges();
  return out;
}

inline SurfaceMesh uniform_refine(const SurfaceMesh& mesh, int rounds = 1) {
  SurfaceMesh out = mesh;
  for (int i = 0; i < rounds; ++i) {
    MarkedSet all(out.n_tris());
    for (int t = 0; t < out.n_tris(); ++t) all[t] = t;
    out = bisect(out, all);
  }
  return out;
}

/// True iff every fine triangle descends from a coarse triangle; on success
/// fills parent_map[fine id] = coarse id.
inline bool is_refinement_of(const SurfaceMesh& fine, const SurfaceMesh& coarse,
                             std::vector<int>* parent_map = nullptr) {
  if (fine.root_signature != coarse.root_signature)
    throw DifferentRoot("meshes do not share a root triangulation");
  std::unordered_map<std::int64_t, int> coarse_by_uid;
  for (int t = 0; t < coarse.n_tris(); ++t) coarse_by_uid[coarse.uid[t]] = t;
  std::vector<int> map(fine.n_tris(), -1);
  for (int t = 0; t < fine.n_tris(); ++t) {
    std::int64_t u = fine.uid[t];
    while (u >= 0) {
      auto it = coarse_by_uid.find(u);
      if (it != coarse_by_uid.end()) {
        map[t] = it->second;
        break;
      }
      u = fine.genealogy[static_cast<std::size_t>(u)];
    }
    if (map[t] < 0) return false;
  }
  if (parent_map) *parent_map = std::move(map);
  return true;
}

} // namespace hodgefem

#endif
