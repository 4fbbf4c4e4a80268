#pragma once

#include "deftet/geometry.hpp"

#include <Eigen/Geometry>

#include <span>
#include <vector>

namespace deftet {

/// Binary AABB tree over a triangle list. Queries reproduce brute-force
/// answers exactly: ray queries report every hit, nearest-point queries break
/// distance ties by lowest triangle index.
class TriangleBvh {
 public:
  struct Hit {
    int triangle = -1;
    RayHit hit;
  };

  struct Nearest {
    int triangle = -1;
    PointTriangleResult result;
  };

  TriangleBvh() = default;
  TriangleBvh(std::span<const Vec3> vertices, std::span<const Tri> triangles);

  [[nodiscard]] bool empty() const { return corners_.empty(); }
  [[nodiscard]] std::size_t size() const { return corners_.size(); }

  /// Appends every intersection with t > kRayTMin to `out` (unsorted).
  void all_hits(const Vec3& origin, const Vec3& direction, std::vector<Hit>& out) const;

  [[nodiscard]] Nearest nearest(const Vec3& p) const;

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    int left = -1;   // child index, or -1 for a leaf
    int right = -1;
    int begin = 0;   // leaf range into order_
    int end = 0;
  };

  int build(int begin, int end, int depth);

  std::vector<std::array<Vec3, 3>> corners_;
  std::vector<Vec3> centers_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

}  // namespace deftet
