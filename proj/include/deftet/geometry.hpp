#pragma once

#include "deftet/common.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace deftet {

/// Triangle soup with shared vertices. Winding-number queries assume it is
/// closed and outward oriented; nothing here enforces that.
struct SurfaceMesh {
  std::vector<Vec3> vertices;
  std::vector<Tri> triangles;

  [[nodiscard]] bool empty() const { return triangles.empty(); }
  [[nodiscard]] Vec3 corner(std::size_t tri, int k) const {
    return vertices[triangles[tri][k]];
  }
};

/// Points drawn from a surface. When the samples came from a triangle list,
/// source_face and barycentrics record where each point sits so callers can
/// move the point together with the triangle.
struct SampleSet {
  std::vector<Vec3> points;
  std::vector<int> source_face;
  std::vector<Vec3> barycentrics;
  std::uint64_t seed = 0;
};

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

/// Gradient of signed_volume with respect to each of the four corners.
std::array<Vec3, 4> signed_volume_grad(const Vec3& a, const Vec3& b, const Vec3& c,
                                       const Vec3& d);

Vec3 centroid(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

/// Signed solid angle subtended by triangle (a, b, c) at p (Van Oosterom and
/// Strackee). Positive when p sees the triangle's back side, so a closed
/// outward-oriented surface yields 4*pi at interior points.
double solid_angle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Generalized winding number of `surface` around p. Brute force over all
/// triangles. On the surface itself the value is half-integral.
double winding_number(const Vec3& p, const SurfaceMesh& surface);

enum class TriRegion : std::uint8_t {
  Interior,
  VertexA,
  VertexB,
  VertexC,
  EdgeAB,
  EdgeBC,
  EdgeCA,
};

struct PointTriangleResult {
  double squared_distance = 0.0;
  Vec3 closest = Vec3::Zero();
  Vec3 barycentric = Vec3::Zero();  // closest = bary(0)*a + bary(1)*b + bary(2)*c
  TriRegion region = TriRegion::Interior;
};

PointTriangleResult point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b,
                                            const Vec3& c);

struct PointTriangleGrad {
  Vec3 d_point = Vec3::Zero();
  std::array<Vec3, 3> d_corner{Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
};

// Gradient of the squared distance with the closest-point region held fixed.
// With the region frozen, the closest point is the minimizer over an affine
// piece, so the barycentric coordinates contribute nothing to first order.
PointTriangleGrad point_triangle_distance_grad(const Vec3& p, const Vec3& a, const Vec3& b,
                                               const Vec3& c);

/// Interior dihedral angles in degrees, edge order (01, 02, 03, 12, 13, 23).
/// Throws DegenerateGeometry for (near) zero-volume tets.
std::array<double, 6> dihedral_angles(const Vec3& a, const Vec3& b, const Vec3& c,
                                      const Vec3& d);

/// Affine barycentric coordinates of `pixel` with respect to the 2D triangle.
/// Throws DegenerateGeometry when the triangle has zero area.
Vec3 barycentric_2d(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& pixel);

inline constexpr double kRayTMin = 1e-6;

struct RayHit {
  double t = 0.0;
  Vec3 barycentric = Vec3::Zero();
};

/// Two-sided Moller-Trumbore intersection; only hits with t > kRayTMin count.
std::optional<RayHit> ray_triangle_intersect(const Vec3& origin, const Vec3& direction,
                                             const Vec3& a, const Vec3& b, const Vec3& c);

/// Area-weighted uniform sampling of the listed triangles. Throws
/// DegenerateGeometry when the total area is zero.
SampleSet sample_triangles(std::span<const Vec3> vertices, std::span<const Tri> triangles,
                           std::size_t count, std::uint64_t seed);

SampleSet sample_surface(const SurfaceMesh& surface, std::size_t count, std::uint64_t seed);

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace deftet
