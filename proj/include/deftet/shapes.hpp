#pragma once

#include "deftet/geometry.hpp"

namespace deftet {

/// Axis-aligned box, 8 vertices and 12 outward-oriented triangles.
SurfaceMesh make_box_mesh(const Vec3& lo, const Vec3& hi);

/// Subdivided icosahedron projected onto a sphere, outward oriented.
/// 20 * 4^subdivisions triangles.
SurfaceMesh make_icosphere(const Vec3& center, double radius, int subdivisions);

}  // namespace deftet
