#include "deftet/geometry.hpp"

#include "deftet/rng.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace deftet {

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

std::array<Vec3, 4> signed_volume_grad(const Vec3& a, const Vec3& b, const Vec3& c,
                                       const Vec3& d) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 e3 = d - a;
  const Vec3 gb = e2.cross(e3) / 6.0;
  const Vec3 gc = e3.cross(e1) / 6.0;
  const Vec3 gd = e1.cross(e2) / 6.0;
  return {-(gb + gc + gd), gb, gc, gd};
}

Vec3 centroid(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (a + b + c + d) * 0.25;
}

double solid_angle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ra = a - p;
  const Vec3 rb = b - p;
  const Vec3 rc = c - p;
  const double la = ra.norm();
  const double lb = rb.norm();
  const double lc = rc.norm();
  const double numerator = ra.dot(rb.cross(rc));
  const double denominator =
      la * lb * lc + ra.dot(rb) * lc + ra.dot(rc) * lb + rb.dot(rc) * la;
  // Coplanar p: the sign of atan2(+-0, negative) is arbitrary, so a point on the
  // triangle would jump between +-2pi. Count it as 0 to keep surface points at 1/2.
  if (std::abs(numerator) <= 1e-14 * la * lb * lc) return 0.0;
  return 2.0 * std::atan2(numerator, denominator);
}

double winding_number(const Vec3& p, const SurfaceMesh& surface) {
  double total = 0.0;
  for (const Tri& t : surface.triangles) {
    total += solid_angle(p, surface.vertices[t[0]], surface.vertices[t[1]],
                         surface.vertices[t[2]]);
  }
  return total / (4.0 * std::numbers::pi);
}

namespace {

PointTriangleResult on_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  double s = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  PointTriangleResult r;
  r.closest = a + s * ab;
  r.squared_distance = (p - r.closest).squaredNorm();
  r.barycentric = Vec3(1.0 - s, s, 0.0);
  return r;
}

PointTriangleResult make_result(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                                double u, double v, double w, TriRegion region) {
  PointTriangleResult r;
  r.barycentric = Vec3(u, v, w);
  r.closest = u * a + v * b + w * c;
  r.squared_distance = (p - r.closest).squaredNorm();
  r.region = region;
  return r;
}

// Closest point on a triangle whose corners are (nearly) collinear: best of
// the three edge segments.
PointTriangleResult degenerate_closest(const Vec3& p, const Vec3& a, const Vec3& b,
                                       const Vec3& c) {
  PointTriangleResult ab = on_segment(p, a, b);
  ab.region = TriRegion::EdgeAB;
  PointTriangleResult bc = on_segment(p, b, c);
  bc.barycentric = Vec3(0.0, bc.barycentric(0), bc.barycentric(1));
  bc.region = TriRegion::EdgeBC;
  PointTriangleResult ca = on_segment(p, c, a);
  ca.barycentric = Vec3(ca.barycentric(1), 0.0, ca.barycentric(0));
  ca.region = TriRegion::EdgeCA;
  PointTriangleResult best = ab;
  if (bc.squared_distance < best.squared_distance) best = bc;
  if (ca.squared_distance < best.squared_distance) best = ca;
  return best;
}

}  // namespace

PointTriangleResult point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b,
                                            const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const double scale = std::max({ab.squaredNorm(), ac.squaredNorm(), (c - b).squaredNorm()});
  if (ab.cross(ac).squaredNorm() <= 1e-24 * scale * scale) {
    return degenerate_closest(p, a, b, c);
  }

  // Region classification follows Ericson, Real-Time Collision Detection 5.1.5.
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return make_result(p, a, b, c, 1, 0, 0, TriRegion::VertexA);

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return make_result(p, a, b, c, 0, 1, 0, TriRegion::VertexB);

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return make_result(p, a, b, c, 1.0 - v, v, 0.0, TriRegion::EdgeAB);
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return make_result(p, a, b, c, 0, 0, 1, TriRegion::VertexC);

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return make_result(p, a, b, c, 1.0 - w, 0.0, w, TriRegion::EdgeCA);
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return make_result(p, a, b, c, 0.0, 1.0 - w, w, TriRegion::EdgeBC);
  }

  const double inv = 1.0 / (va + vb + vc);
  const double v = vb * inv;
  const double w = vc * inv;
  return make_result(p, a, b, c, 1.0 - v - w, v, w, TriRegion::Interior);
}

PointTriangleGrad point_triangle_distance_grad(const Vec3& p, const Vec3& a, const Vec3& b,
                                               const Vec3& c) {
  const PointTriangleResult r = point_triangle_distance(p, a, b, c);
  const Vec3 diff = 2.0 * (p - r.closest);
  PointTriangleGrad g;
  g.d_point = diff;
  for (int k = 0; k < 3; ++k) g.d_corner[k] = -r.barycentric(k) * diff;
  return g;
}

std::array<double, 6> dihedral_angles(const Vec3& a, const Vec3& b, const Vec3& c,
                                      const Vec3& d) {
  const std::array<Vec3, 4> v{a, b, c, d};
  static constexpr int kEdges[6][4] = {{0, 1, 2, 3}, {0, 2, 1, 3}, {0, 3, 1, 2},
                                       {1, 2, 0, 3}, {1, 3, 0, 2}, {2, 3, 0, 1}};
  double longest = 0.0;
  for (const auto& e : kEdges) longest = std::max(longest, (v[e[1]] - v[e[0]]).norm());
  const double volume6 = std::abs(6.0 * signed_volume(a, b, c, d));
  if (!(volume6 > 1e-12 * longest * longest * longest)) {
    throw DegenerateGeometry("dihedral_angles: degenerate tetrahedron");
  }

  std::array<double, 6> angles{};
  for (int i = 0; i < 6; ++i) {
    const auto& e = kEdges[i];
    const Vec3 axis = (v[e[1]] - v[e[0]]).normalized();
    Vec3 u = v[e[2]] - v[e[0]];
    Vec3 w = v[e[3]] - v[e[0]];
    u -= u.dot(axis) * axis;
    w -= w.dot(axis) * axis;
    angles[i] = std::atan2(u.cross(w).norm(), u.dot(w)) * 180.0 / std::numbers::pi;
  }
  return angles;
}

namespace {
double cross2(const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); }
}  // namespace

Vec3 barycentric_2d(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& pixel) {
  const double area = cross2(b - a, c - a);
  const double scale = std::max({(b - a).squaredNorm(), (c - a).squaredNorm(),
                                 (c - b).squaredNorm()});
  if (!(std::abs(area) > 1e-14 * scale)) {
    throw DegenerateGeometry("barycentric_2d: zero-area triangle");
  }
  const double wa = cross2(b - pixel, c - pixel) / area;
  const double wb = cross2(c - pixel, a - pixel) / area;
  const double wc = cross2(a - pixel, b - pixel) / area;
  return {wa, wb, wc};
}

std::optional<RayHit> ray_triangle_intersect(const Vec3& origin, const Vec3& direction,
                                             const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 pvec = direction.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) <= 1e-14 * e1.norm() * e2.norm() * direction.norm()) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 tvec = origin - a;
  const double u = tvec.dot(pvec) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 qvec = tvec.cross(e1);
  const double v = direction.dot(qvec) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(qvec) * inv;
  if (!(t > kRayTMin)) return std::nullopt;
  return RayHit{t, Vec3(1.0 - u - v, u, v)};
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

SampleSet sample_triangles(std::span<const Vec3> vertices, std::span<const Tri> triangles,
                           std::size_t count, std::uint64_t seed) {
  if (count == 0) throw InvalidArgument("sample_triangles: count must be >= 1");
  std::vector<double> cumulative(triangles.size());
  double total = 0.0;
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    const Tri& t = triangles[i];
    total += triangle_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
    cumulative[i] = total;
  }
  if (!(total > 0.0)) throw DegenerateGeometry("sample_triangles: zero total area");

  Rng rng(seed);
  SampleSet out;
  out.seed = seed;
  out.points.reserve(count);
  out.source_face.reserve(count);
  out.barycentrics.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double pick = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    // upper_bound never lands on a zero-area triangle.
    const std::size_t face =
        std::min<std::size_t>(it - cumulative.begin(), triangles.size() - 1);
    const double s = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const Vec3 bary(1.0 - s, s * (1.0 - r2), s * r2);
    const Tri& t = triangles[face];
    out.points.push_back(bary(0) * vertices[t[0]] + bary(1) * vertices[t[1]] +
                         bary(2) * vertices[t[2]]);
    out.source_face.push_back(static_cast<int>(face));
    out.barycentrics.push_back(bary);
  }
  return out;
}

SampleSet sample_surface(const SurfaceMesh& surface, std::size_t count, std::uint64_t seed) {
  return sample_triangles(surface.vertices, surface.triangles, count, seed);
}

}  // namespace deftet
