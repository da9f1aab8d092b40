#include <hodgefem/mesh.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <random>
#include <set>

using namespace hodgefem;

namespace {

// Independent newest-vertex-bisection reference: recursion plus brute-force
// neighbor scans, no incidence bookkeeping shared with the library.
struct RefBisect {
  std::vector<Vec3> verts;
  std::vector<std::array<int, 3>> tris; // refinement edge is (0, 1)
  std::vector<bool> alive;
  std::map<std::pair<int, int>, int> mid;

  explicit RefBisect(const SurfaceMesh& m)
      : verts(m.vertices), tris(m.tris), alive(m.n_tris(), true) {}

  int midpoint(int a, int b) {
    if (a > b) std::swap(a, b);
    auto it = mid.find({a, b});
    if (it != mid.end()) return it->second;
    int v = static_cast<int>(verts.size());
    verts.push_back(0.5 * (verts[a] + verts[b]));
    mid[{a, b}] = v;
    return v;
  }

  int neighbor(int t) const {
    int a = tris[t][0], b = tris[t][1];
    for (int s = 0; s < static_cast<int>(tris.size()); ++s) {
      if (s == t || !alive[s]) continue;
      for (int i = 0; i < 3; ++i) {
        int c = tris[s][i], d = tris[s][(i + 1) % 3];
        if ((c == a && d == b) || (c == b && d == a)) return s;
      }
    }
    return -1;
  }

  void split(int t) {
    int p = tris[t][0], q = tris[t][1], o = tris[t][2];
    int m = midpoint(p, q);
    alive[t] = false;
    tris.push_back({o, p, m});
    alive.push_back(true);
    tris.push_back({q, o, m});
    alive.push_back(true);
  }

  void refine(int t) {
    if (!alive[t]) return;
    int nb = neighbor(t);
    while (nb >= 0) {
      int na = tris[nb][0], nbv = tris[nb][1];
      bool compatible = (std::minmax(na, nbv) ==
                         std::minmax(tris[t][0], tris[t][1]));
      if (compatible) break;
      refine(nb);
      nb = neighbor(t);
    }
    split(t);
    if (nb >= 0 && alive[nb]) split(nb);
  }

  std::multiset<std::array<int, 3>> canonical() const {
    std::multiset<std::array<int, 3>> out;
    for (std::size_t t = 0; t < tris.size(); ++t) {
      if (!alive[t]) continue;
      std::array<int, 3> s = tris[t];
      std::sort(s.begin(), s.end());
      out.insert(s);
    }
    return out;
  }
};

std::multiset<std::array<int, 3>> canonical_tris(const SurfaceMesh& m) {
  std::multiset<std::array<int, 3>> out;
  for (const auto& tri : m.tris) {
    std::array<int, 3> s = tri;
    std::sort(s.begin(), s.end());
    out.insert(s);
  }
  return out;
}

double total_area(const SurfaceMesh& m) {
  double a = 0;
  for (int t = 0; t < m.n_tris(); ++t) a += m.area(t);
  return a;
}

} // namespace

TEST_CASE("initial meshes have the expected counts and topology") {
  SurfaceMesh icosa = build_initial("sphere", "icosahedron");
  REQUIRE(icosa.n_vertices() == 12);
  REQUIRE(icosa.n_tris() == 20);
  REQUIRE(icosa.n_edges() == 30);
  REQUIRE(icosa.euler_characteristic() == 2);
  REQUIRE(icosa.check_manifold());

  SurfaceMesh octa = build_initial("sphere", "octahedron");
  REQUIRE(octa.n_vertices() == 6);
  REQUIRE(octa.n_tris() == 8);
  REQUIRE(octa.euler_characteristic() == 2);
  REQUIRE(octa.check_manifold());

  SurfaceMesh torus = build_initial("torus:R=2,r=0.5", "torus-grid:8x8");
  REQUIRE(torus.n_vertices() == 64);
  REQUIRE(torus.n_tris() == 128);
  REQUIRE(torus.euler_characteristic() == 0);
  REQUIRE(torus.check_manifold());

  REQUIRE_THROWS_AS(build_initial("sphere", "dodecahedron"), UnknownPreset);
  REQUIRE_THROWS_AS(build_initial("sphere", "torus-grid:8"), UnknownPreset);
}

TEST_CASE("initial triangles are oriented outward") {
  SurfaceMesh icosa = build_initial("sphere", "icosahedron");
  for (int t = 0; t < icosa.n_tris(); ++t)
    REQUIRE(icosa.frame(t).normal.dot(icosa.centroid(t)) > 0);
}

TEST_CASE("bisection matches the brute-force reference") {
  std::mt19937 rng(101);
  SurfaceMesh mesh = build_initial("sphere", "icosahedron");
  for (int step = 0; step < 12; ++step) {
    std::set<int> pick;
    int k = 1 + static_cast<int>(rng() % 4);
    while (static_cast<int>(pick.size()) < k)
      pick.insert(static_cast<int>(rng() % mesh.n_tris()));
    MarkedSet marked(pick.begin(), pick.end());

    RefBisect ref(mesh);
    for (int id : marked) ref.refine(id);

    SurfaceMesh next = bisect(mesh, marked);
    REQUIRE(canonical_tris(next) == ref.canonical());
    REQUIRE(next.n_vertices() == static_cast<int>(ref.verts.size()));
    REQUIRE(next.check_manifold());
    REQUIRE(next.euler_characteristic() == 2);
    mesh = next;
  }
}

TEST_CASE("bisection conserves flat area and keeps orientation") {
  SurfaceMesh mesh = build_initial("sphere", "icosahedron");
  double a0 = total_area(mesh);
  std::mt19937 rng(7);
  for (int step = 0; step < 10; ++step) {
    MarkedSet marked{static_cast<int>(rng() % mesh.n_tris())};
    mesh = bisect(mesh, marked);
    REQUIRE(std::abs(total_area(mesh) - a0) < 1e-13 * a0);
    REQUIRE(mesh.check_manifold());
  }
}

TEST_CASE("shape regularity stays bounded under uniform refinement") {
  SurfaceMesh mesh = build_initial("sphere", "icosahedron");
  double sr0 = shape_regularity(mesh);
  REQUIRE(sr0 > 0.1);
  SurfaceMesh fine4 = uniform_refine(mesh, 4);
  SurfaceMesh fine6 = uniform_refine(fine4, 2);
  REQUIRE(shape_regularity(fine6) >= 0.9 * shape_regularity(fine4));
  REQUIRE(shape_regularity(fine6) > 0.2 * sr0);
}

TEST_CASE("uniform refinement bookkeeping") {
  SurfaceMesh mesh = build_initial("sphere", "icosahedron");
  SurfaceMesh fine = uniform_refine(mesh, 2);
  REQUIRE(fine.n_tris() == 112); // all-marked NVB with closure, two rounds
  REQUIRE(fine.check_manifold());
  REQUIRE(fine.euler_characteristic() == 2);
  std::vector<int> parent;
  REQUIRE(is_refinement_of(fine, mesh, &parent));
  for (int t = 0; t < fine.n_tris(); ++t) {
    REQUIRE(parent[t] >= 0);
    REQUIRE(parent[t] < mesh.n_tris());
    // child centroids stay inside the (flat, convex) parent: check by
    // barycentric coordinates w.r.t. the parent triangle
    TriangleFrame pf = mesh.frame(parent[t]);
    Vec2 a = pf.to_plane(mesh.point(parent[t], 0) - pf.origin);
    Vec2 b = pf.to_plane(mesh.point(parent[t], 1) - pf.origin);
    Vec2 c = pf.to_plane(mesh.point(parent[t], 2) - pf.origin);
    Vec2 x = pf.to_plane(fine.centroid(t) - pf.origin);
    Eigen::Matrix2d T;
    T.col(0) = b - a;
    T.col(1) = c - a;
    Vec2 lam = T.inverse() * (x - a);
    REQUIRE(lam[0] > -1e-10);
    REQUIRE(lam[1] > -1e-10);
    REQUIRE(lam[0] + lam[1] < 1 + 1e-10);
  }
}

TEST_CASE("uids and genealogy are consistent") {
  SurfaceMesh mesh = build_initial("sphere", "icosahedron");
  SurfaceMesh fine = bisect(mesh, MarkedSet{0, 5, 7});
  std::set<std::int64_t> coarse_uids(mesh.uid.begin(), mesh.uid.end());
  std::set<std::int64_t> seen;
  for (int t = 0; t < fine.n_tris(); ++t) {
    REQUIRE(seen.insert(fine.uid[t]).second); // unique
    REQUIRE((fine.child_index[t] == 0 || fine.child_index[t] == 1));
    if (coarse_uids.count(fine.uid[t])) {
      REQUIRE(fine.generation[t] == 0);
    } else {
      std::int64_t p = fine.genealogy[fine.uid[t]];
      REQUIRE(coarse_uids.count(p) == 1);
      REQUIRE(fine.generation[t] == 1);
    }
  }
  REQUIRE(fine.cumulative_marked == 3);
}

TEST_CASE("refinement relation errors") {
  SurfaceMesh a = build_initial("sphere", "icosahedron");
  SurfaceMesh b = build_initial("sphere", "icosahedron");
  REQUIRE_THROWS_AS(is_refinement_of(a, b), DifferentRoot);
  SurfaceMesh fine = uniform_refine(a, 1);
  REQUIRE(is_refinement_of(fine, a));
  REQUIRE_FALSE(is_refinement_of(a, fine)); // coarse is not a refinement
  REQUIRE_THROWS_AS(bisect(a, MarkedSet{99}), std::out_of_range);
  REQUIRE_THROWS_AS(bisect(a, MarkedSet{-1}), std::out_of_range);
}

TEST_CASE("element diameter is the longest edge") {
  SurfaceMesh mesh = build_initial("sphere", "icosahedron");
  for (int t = 0; t < mesh.n_tris(); ++t) {
    double d = element_diameter(mesh, t);
    for (int i = 0; i < 3; ++i)
      REQUIRE(d + 1e-15 >=
              (mesh.point(t, i) - mesh.point(t, (i + 1) % 3)).norm());
  }
}

TEST_CASE("complexity of closure stays linear in the marks") {
  for (unsigned seed : {1u, 2u}) {
    std::mt19937 rng(seed);
    SurfaceMesh mesh = build_initial("sphere", "icosahedron");
    int n0 = mesh.n_tris();
    for (int step = 0; step < 150; ++step) {
      std::set<int> pick;
      int k = 1 + static_cast<int>(rng() % 3);
      while (static_cast<int>(pick.size()) < k)
        pick.insert(static_cast<int>(rng() % mesh.n_tris()));
      mesh = bisect(mesh, MarkedSet(pick.begin(), pick.end()));
    }
    double C = double(mesh.n_tris() - n0) / double(mesh.cumulative_marked);
    REQUIRE(C < 16.0);
    REQUIRE(C > 1.0);
  }
}

TEST_CASE("randomized marking fuzz keeps every invariant") {
  std::mt19937 rng(424242);
  SurfaceMesh mesh = build_initial("sphere", "icosahedron");
  double a0 = total_area(mesh);
  double sr_floor = 0.2 * shape_regularity(mesh);
  double area_drift = 0.0;
  for (int step = 0; step < 300; ++step) {
    std::set<int> pick;
    int k = 1 + static_cast<int>(rng() % 3);
    while (static_cast<int>(pick.size()) < k)
      pick.insert(static_cast<int>(rng() % mesh.n_tris()));
    mesh = bisect(mesh, MarkedSet(pick.begin(), pick.end()));
    REQUIRE(mesh.check_manifold());
    REQUIRE(mesh.euler_characteristic() == 2);
    REQUIRE(shape_regularity(mesh) > sr_floor);
    area_drift = std::max(area_drift, std::abs(total_area(mesh) - a0));
  }
  REQUIRE(area_drift < 1e-12 * a0);
  REQUIRE(mesh.n_tris() - 20 <= 16 * mesh.cumulative_marked);
}
