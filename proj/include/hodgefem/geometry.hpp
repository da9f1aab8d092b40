#ifndef HODGEFEM_GEOMETRY_HPP
#define HODGEFEM_GEOMETRY_HPP

#include "hodgefem/core.hpp"

#include <cmath>
#include <sstream>
#include <vector>

namespace hodgefem {

// ---------------------------------------------------------------------------
// Implicit surface descriptions
// ---------------------------------------------------------------------------

/// A closed hypersurface M described by its signed distance function.
/// Inside the tube |delta(x)| < tubular_radius the gradient of delta is the
/// unit normal at the projected point and the normal projection
/// a(x) = x - delta(x) nu(x) is well defined.
struct ImplicitSurface {
  std::string name;
  ScalarField signed_distance;
  VectorField gradient;                         // nu
  std::function<Mat3(const Vec3&)> shape_operator; // S = -grad(nu)
  double tubular_radius = 0.0;

  Vec3 project(const Vec3& x) const {
    double d = signed_distance(x);
    if (std::abs(d) >= tubular_radius)
      throw OutsideTube("point outside tubular neighborhood of " + name);
    Vec3 p = x - d * gradient(x);
    // Presets have exact distance functions; one correction step soaks up
    // rounding for anything else.
    for (int it = 0; it < 3; ++it) {
      double dp = signed_distance(p);
      if (std::abs(dp) <= 1e-12 * (1.0 + p.norm())) break;
      p -= dp * gradient(p);
    }
    return p;
  }

  static ImplicitSurface sphere() {
    ImplicitSurface s;
    s.name = "sphere";
    s.signed_distance = [](const Vec3& x) { return x.norm() - 1.0; };
    s.gradient = [](const Vec3& x) { return Vec3(x / x.norm()); };
    s.shape_operator = [](const Vec3& x) {
      double r = x.norm();
      Vec3 n = x / r;
      Mat3 S = -(Mat3::Identity() - n * n.transpose()) / r;
      return S;
    };
    // Analytic bound is 1; keep a margin for coarse-mesh quadrature points.
    s.tubular_radius = 0.9;
    return s;
  }

  static ImplicitSurface torus(double R, double r) {
    ImplicitSurface s;
    std::ostringstream os;
    os << "torus:R=" << R << ",r=" << r;
    s.name = os.str();
    auto dist = [R, r](const Vec3& x) {
      double rho = std::hypot(x[0], x[1]);
      return std::hypot(rho - R, x[2]) - r;
    };
    auto grad = [R](const Vec3& x) {
      double rho = std::hypot(x[0], x[1]);
      double q = rho - R;
      double d = std::hypot(q, x[2]);
      Vec3 u(x[0] / rho, x[1] / rho, 0.0);
      return Vec3((q / d) * u + Vec3(0, 0, x[2] / d));
    };
    s.signed_distance = dist;
    s.gradient = grad;
    s.shape_operator = [R](const Vec3& x) {
      double rho = std::hypot(x[0], x[1]);
      double q = rho - R;
      double d = std::hypot(q, x[2]);
      double z = x[2];
      Vec3 u(x[0] / rho, x[1] / rho, 0.0);
      Vec3 ez(0, 0, 1);
      Mat3 Pxy = Mat3::Identity();
      Pxy(2, 2) = 0.0;
      // Hessian of delta(x) = d(rho(x), z) - r by composition.
      double d_rr = z * z / (d * d * d);
      double d_zz = q * q / (d * d * d);
      double d_rz = -q * z / (d * d * d);
      double d_r = q / d;
      Mat3 hess_rho = (Pxy - u * u.transpose()) / rho;
      Mat3 H = d_rr * u * u.transpose() + d_r * hess_rho +
               d_rz * (u * ez.transpose() + ez * u.transpose()) +
               d_zz * ez * ez.transpose();
      return Mat3(-H);
    };
    s.tubular_radius = 0.9 * r;
    return s;
  }

  /// Flat "surface": the plane through the origin with unit normal n.
  static ImplicitSurface plane(const Vec3& normal = Vec3(0, 0, 1)) {
    ImplicitSurface s;
    s.name = "plane";
    Vec3 n = normal.normalized();
    s.signed_distance = [n](const Vec3& x) { return n.dot(x); };
    s.gradient = [n](const Vec3&) { return n; };
    s.shape_operator = [](const Vec3&) { return Mat3(Mat3::Zero()); };
    s.tubular_radius = 1e300;
    return s;
  }

  /// Presets by configuration name: "sphere", "plane", "torus:R=2,r=0.5".
  static ImplicitSurface from_name(const std::string& name) {
    if (name == "sphere") return sphere();
    if (name == "plane") return plane();
    if (name.rfind("torus", 0) == 0) {
      double R = 2.0, r = 0.5;
      auto pos = name.find(':');
      if (pos != std::string::npos) {
        std::string args = name.substr(pos + 1);
        for (auto& c : args)
          if (c == ',') c = ' ';
        std::istringstream is(args);
        std::string tok;
        while (is >> tok) {
          if (tok.rfind("R=", 0) == 0) R = std::stod(tok.substr(2));
          else if (tok.rfind("r=", 0) == 0) r = std::stod(tok.substr(2));
          else throw UnknownPreset("bad torus parameter: " + tok);
        }
      }
      return torus(R, r);
    }
    throw UnknownPreset("unknown surface preset: " + name);
  }
};

inline Vec3 normal_projection(const ImplicitSurface& surface, const Vec3& x) {
  return surface.project(x);
}

// ---------------------------------------------------------------------------
// Triangle frames and tangent maps
// ---------------------------------------------------------------------------

/// Orthonormal in-plane basis of a flat triangle, right-handed with respect
/// to the triangle's normal (v1-v0) x (v2-v0).
struct TriangleFrame {
  Vec3 origin;
  Vec3 t1, t2, normal;
  double area;

  TriangleFrame(const Vec3& p0, const Vec3& p1, const Vec3& p2) {
    origin = p0;
    Vec3 e1 = p1 - p0, e2 = p2 - p0;
    Vec3 n = e1.cross(e2);
    double n2 = n.norm();
    area = 0.5 * n2;
    double scale2 = std::max(e1.squaredNorm(), e2.squaredNorm());
    if (area < 1e-14 * std::max(scale2, 1e-300))
      throw DegenerateTriangle("triangle area below tolerance");
    normal = n / n2;
    t1 = e1.normalized();
    t2 = normal.cross(t1);
  }

  Vec2 to_plane(const Vec3& v) const { return Vec2(t1.dot(v), t2.dot(v)); }
  Vec3 from_plane(const Vec2& v) const { return v[0] * t1 + v[1] * t2; }
};

struct TangentSample {
  Vec3 base_point;
  Vec3 projected_point;
  Mat32 jacobian;  // derivative of a restricted to the triangle plane
  Mat2 metric;     // G = J^T J
  double alpha1 = 0.0, alpha2 = 0.0; // singular values, alpha1 >= alpha2
  double area_factor = 0.0;          // alpha1*alpha2 = sqrt(det G)
};

inline TangentSample tangent_map(const ImplicitSurface& surface,
                                 const TriangleFrame& frame, const Vec3& x) {
  double d = surface.signed_distance(x);
  if (std::abs(d) >= surface.tubular_radius)
    throw OutsideTube("quadrature point outside tube");
  Vec3 nu = surface.gradient(x);
  Mat3 S = surface.shape_operator(x);
  Mat3 grad_a = (Mat3::Identity() - nu * nu.transpose()) + d * S;
  TangentSample ts;
  ts.base_point = x;
  ts.projected_point = x - d * nu;
  ts.jacobian.col(0) = grad_a * frame.t1;
  ts.jacobian.col(1) = grad_a * frame.t2;
  ts.metric = ts.jacobian.transpose() * ts.jacobian;
  Eigen::SelfAdjointEigenSolver<Mat2> es(ts.metric);
  double l0 = std::max(es.eigenvalues()[0], 0.0);
  double l1 = std::max(es.eigenvalues()[1], 0.0);
  ts.alpha2 = std::sqrt(std::min(l0, l1));
  ts.alpha1 = std::sqrt(std::max(l0, l1));
  ts.area_factor = ts.alpha1 * ts.alpha2;
  return ts;
}

inline TangentSample tangent_map(const ImplicitSurface& surface, const Vec3& p0,
                                 const Vec3& p1, const Vec3& p2,
                                 const Vec3& bary) {
  TriangleFrame frame(p0, p1, p2);
  Vec3 x = bary[0] * p0 + bary[1] * p1 + bary[2] * p2;
  return tangent_map(surface, frame, x);
}

/// Pullback of a top-form density f on M: coefficient relative to the flat
/// area form of the triangle is f(a(x)) * alpha1 * alpha2.
inline double pullback_topform(const ImplicitSurface& surface,
                               const ScalarField& f_on_M,
                               const TriangleFrame& frame, const Vec3& x) {
  TangentSample ts = tangent_map(surface, frame, x);
  return f_on_M(ts.projected_point) * ts.area_factor;
}

/// Pullback of a 1-form on M (covector tangent to M at a(x)), expressed in
/// the triangle-plane basis: J^T omega.
inline Vec2 pullback_oneform(const ImplicitSurface& surface,
                             const VectorField& omega_on_M,
                             const TriangleFrame& frame, const Vec3& x) {
  TangentSample ts = tangent_map(surface, frame, x);
  return Vec2(ts.jacobian.transpose() * omega_on_M(ts.projected_point));
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Barycentric rule on the reference triangle; weights sum to 1/2.
struct QuadratureRule {
  int degree = 0;
  std::vector<Vec3> points;   // barycentric triples
  std::vector<double> weights;
};

namespace detail {

inline void push_sym3(QuadratureRule& q, double a, double b, double c,
                      double w) {
  // all distinct permutations of (a, b, c)
  std::array<std::array<double, 3>, 6> perms = {{{a, b, c},
                                                 {a, c, b},
                                                 {b, a, c},
                                                 {b, c, a},
                                                 {c, a, b},
                                                 {c, b, a}}};
  for (const auto& p : perms) {
    bool dup = false;
    for (const auto& existing : q.points) {
      if (std::abs(existing[0] - p[0]) < 1e-14 &&
          std::abs(existing[1] - p[1]) < 1e-14 &&
          std::abs(existing[2] - p[2]) < 1e-14) {
        dup = true;
        break;
      }
    }
    if (!dup) {
      q.points.emplace_back(p[0], p[1], p[2]);
      q.weights.push_back(w);
    }
  }
}

} // namespace detail

/// Dunavant-type rules, exact for bivariate polynomials up to `degree`.
inline QuadratureRule quadrature_rule(int degree) {
  if (degree < 1 || degree > 6)
    throw UnsupportedDegree("quadrature degree must be in [1, 6]");
  QuadratureRule q;
  q.degree = degree;
  const double half = 0.5;
  switch (degree) {
    case 1:
      detail::push_sym3(q, 1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0 * half);
      break;
    case 2:
      detail::push_sym3(q, 2.0 / 3, 1.0 / 6, 1.0 / 6, (1.0 / 3) * half);
      break;
    case 3:
    case 4:
      detail::push_sym3(q, 0.108103018168070, 0.445948490915965,
                        0.445948490915965, 0.223381589678011 * half);
      detail::push_sym3(q, 0.816847572980459, 0.091576213509771,
                        0.091576213509771, 0.109951743655322 * half);
      q.degree = 4;
      break;
    case 5:
      detail::push_sym3(q, 1.0 / 3, 1.0 / 3, 1.0 / 3, 0.225 * half);
      detail::push_sym3(q, 0.059715871789770, 0.470142064105115,
                        0.470142064105115, 0.132394152788506 * half);
      detail::push_sym3(q, 0.797426985353087, 0.101286507323456,
                        0.101286507323456, 0.125939180544827 * half);
      break;
    case 6:
      detail::push_sym3(q, 0.501426509658179, 0.249286745170910,
                        0.249286745170910, 0.116786275726379 * half);
      detail::push_sym3(q, 0.873821971016996, 0.063089014491502,
                        0.063089014491502, 0.050844906370207 * half);
      detail::push_sym3(q, 0.053145049844816, 0.310352451033785,
                        0.636502499121399, 0.082851075618374 * half);
      break;
  }
  return q;
}

/// Gauss-Legendre nodes/weights on [0, 1]; n in {1..5}.
struct EdgeRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline EdgeRule edge_gauss(int n) {
  EdgeRule r;
  auto add = [&](double x, double w) {
    // nodes given on [-1, 1]
    r.nodes.push_back(0.5 * (x + 1.0));
    r.weights.push_back(0.5 * w);
  };
  switch (n) {
    case 1:
      add(0.0, 2.0);
      break;
    case 2:
      add(-1.0 / std::sqrt(3.0), 1.0);
      add(1.0 / std::sqrt(3.0), 1.0);
      break;
    case 3:
      add(-std::sqrt(3.0 / 5.0), 5.0 / 9.0);
      add(0.0, 8.0 / 9.0);
      add(std::sqrt(3.0 / 5.0), 5.0 / 9.0);
      break;
    case 4: {
      double a = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
      double b = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
      double wa = (18.0 + std::sqrt(30.0)) / 36.0;
      double wb = (18.0 - std::sqrt(30.0)) / 36.0;
      add(-a, wa);
      add(a, wa);
      add(-b, wb);
      add(b, wb);
      break;
    }
    case 5: {
      double a = std::sqrt(5.0 - 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
      double b = std::sqrt(5.0 + 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
      double wa = (322.0 + 13.0 * std::sqrt(70.0)) / 900.0;
      double wb = (322.0 - 13.0 * std::sqrt(70.0)) / 900.0;
      add(0.0, 128.0 / 225.0);
      add(-a, wa);
      add(a, wa);
      add(-b, wb);
      add(b, wb);
      break;
    }
    default:
      throw UnsupportedDegree("edge Gauss rule supports 1..5 points");
  }
  return r;
}

} // namespace hodgefem

#endif
