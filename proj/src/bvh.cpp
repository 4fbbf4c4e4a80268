#include "deftet/bvh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace deftet {

namespace {

constexpr int kLeafSize = 4;

bool ray_hits_box(const Eigen::AlignedBox3d& box, const Vec3& origin, const Vec3& direction) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    const double d = direction(axis);
    const double o = origin(axis);
    if (d == 0.0) {
      if (o < box.min()(axis) || o > box.max()(axis)) return false;
      continue;
    }
    double near = (box.min()(axis) - o) / d;
    double far = (box.max()(axis) - o) / d;
    if (near > far) std::swap(near, far);
    t0 = std::max(t0, near);
    t1 = std::min(t1, far);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

TriangleBvh::TriangleBvh(std::span<const Vec3> vertices, std::span<const Tri> triangles) {
  corners_.reserve(triangles.size());
  centers_.reserve(triangles.size());
  for (const Tri& t : triangles) {
    corners_.push_back({vertices[t[0]], vertices[t[1]], vertices[t[2]]});
    centers_.push_back((vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) / 3.0);
  }
  order_.resize(triangles.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
  if (!order_.empty()) {
    nodes_.reserve(2 * order_.size() / kLeafSize + 1);
    build(0, static_cast<int>(order_.size()), 0);
  }
}

int TriangleBvh::build(int begin, int end, int depth) {
  const int index = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d center_box;
  for (int i = begin; i < end; ++i) {
    for (const Vec3& c : corners_[order_[i]]) box.extend(c);
    center_box.extend(centers_[order_[i]]);
  }
  // Pad so rounding in the slab test can never reject a ray the exact
  // triangle test would accept.
  const double pad = 1e-9 * (box.diagonal().norm() + 1.0);
  box.min().array() -= pad;
  box.max().array() += pad;
  nodes_[index].box = box;

  if (end - begin <= kLeafSize || depth > 60) {
    nodes_[index].begin = begin;
    nodes_[index].end = end;
    return index;
  }

  int axis = 0;
  center_box.diagonal().maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     const double ca = centers_[a](axis);
                     const double cb = centers_[b](axis);
                     return ca < cb || (ca == cb && a < b);
                   });
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

void TriangleBvh::all_hits(const Vec3& origin, const Vec3& direction,
                           std::vector<Hit>& out) const {
  if (nodes_.empty()) return;
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (!ray_hits_box(node.box, origin, direction)) continue;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const auto& c = corners_[order_[i]];
        if (auto hit = ray_triangle_intersect(origin, direction, c[0], c[1], c[2])) {
          out.push_back({order_[i], *hit});
        }
      }
      continue;
    }
    stack[top++] = node.left;
    stack[top++] = node.right;
  }
}

TriangleBvh::Nearest TriangleBvh::nearest(const Vec3& p) const {
  Nearest best;
  best.result.squared_distance = std::numeric_limits<double>::infinity();
  if (nodes_.empty()) return best;
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (node.box.squaredExteriorDistance(p) > best.result.squared_distance) continue;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int tri = order_[i];
        const auto& c = corners_[tri];
        const PointTriangleResult r = point_triangle_distance(p, c[0], c[1], c[2]);
        if (r.squared_distance < best.result.squared_distance ||
            (r.squared_distance == best.result.squared_distance && tri < best.triangle)) {
          best.triangle = tri;
          best.result = r;
        }
      }
      continue;
    }
    // Visit the closer child first.
    const double dl = nodes_[node.left].box.squaredExteriorDistance(p);
    const double dr = nodes_[node.right].box.squaredExteriorDistance(p);
    if (dl <= dr) {
      stack[top++] = node.right;
      stack[top++] = node.left;
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  return best;
}

}  // namespace deftet
