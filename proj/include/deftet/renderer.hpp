#pragma once

#include "deftet/bvh.hpp"
#include "deftet/image.hpp"
#include "deftet/lattice.hpp"

#include <Eigen/Geometry>

#include <span>
#include <vector>

namespace deftet {

/// Pinhole camera. Camera space looks down +z with +x right and +y down in
/// the image; pixel (x, y) is sampled at its center (x + 0.5, y + 0.5):
///   u = fx * X / Z + cx,  v = fy * Y / Z + cy,  [X Y Z 1]^T = world_to_camera * p.
struct Camera {
  int width = 0;
  int height = 0;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Eigen::Matrix4d world_to_camera = Eigen::Matrix4d::Identity();

  /// Throws ValidationError unless sizes and focal lengths are positive and
  /// the rotation block is orthonormal within `tolerance`.
  void validate(double tolerance = 1e-9) const;

  [[nodiscard]] Mat3 rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
  [[nodiscard]] Vec3 translation() const { return world_to_camera.topRightCorner<3, 1>(); }
  [[nodiscard]] Vec3 center() const { return -rotation().transpose() * translation(); }
  [[nodiscard]] Vec3 to_camera(const Vec3& p) const { return rotation() * p + translation(); }
  /// World-space direction through the pixel center; its camera-space z is 1,
  /// so ray parameters equal depth.
  [[nodiscard]] Vec3 pixel_ray(int x, int y) const;
  [[nodiscard]] Vec2 project(const Vec3& p) const;

  /// Camera at `eye` looking at `target`; `up` fixes the roll (image y points
  /// along -up).
  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width,
                        int height, double fov_y_degrees);
};

/// Colors in [0, 1] and per-vertex visibility D in (0, 1).
struct VertexAttributes {
  std::vector<Vec3> colors;
  std::vector<double> visibility;

  [[nodiscard]] std::size_t size() const { return colors.size(); }
  static VertexAttributes from_logits(std::vector<Vec3> colors,
                                      const std::vector<double>& visibility_logits);
};

struct PixelHit {
  int face = -1;
  double t = 0.0;
  Vec3 barycentric = Vec3::Zero();  // screen-space, w.r.t. grid.faces[face] corner order
};

/// Per-pixel hits in ascending t (ties by face index), stored row-major as
/// compressed rows: hits for pixel j are hits[start[j] .. start[j + 1]).
struct HitList {
  int width = 0;
  int height = 0;
  std::vector<std::size_t> start;
  std::vector<PixelHit> hits;

  [[nodiscard]] std::span<const PixelHit> pixel(std::size_t j) const {
    return {hits.data() + start[j], start[j + 1] - start[j]};
  }
  [[nodiscard]] std::size_t pixel_count() const { return start.empty() ? 0 : start.size() - 1; }
};

/// Casts one ray per pixel center against the listed grid faces at their
/// deformed positions. Hits on faces that project to a zero-area triangle or
/// reach behind the camera plane are dropped.
HitList cast_rays(const TetGrid& grid, std::span<const int> faces, const Camera& camera);

/// Sorts one pixel's raw hits into compositing order.
void sort_hits(std::vector<PixelHit>& hits);

/// Screen-space barycentrics of `face` at the center of pixel (x, y), or
/// nullopt when the projection is degenerate.
std::optional<Vec3> face_pixel_barycentrics(const TetGrid& grid, int face, const Camera& camera,
                                            int x, int y);

/// Recomputes barycentrics of a frozen hit set for the current offsets.
void refresh_barycentrics(HitList& hits, const TetGrid& grid, const Camera& camera);

/// Front-to-back soft visibility compositing:
///   m_k = prod_{i<k} (1 - D^i) D^k,  M = sum m_k,  R = sum m_k C^k.
Image composite(const HitList& hits, const VertexAttributes& attrs, const TetGrid& grid);

struct CompositeGradients {
  std::vector<Vec3> colors;
  std::vector<double> visibility;         // w.r.t. D
  std::vector<double> visibility_logits;  // w.r.t. logit(D)
  std::vector<Vec3> offsets;
};

/// Reverse mode of composite() with the hit set and ordering frozen. Vertex
/// gradients flow through the screen-space barycentric weights.
CompositeGradients composite_backward(const HitList& hits, const VertexAttributes& attrs,
                                      const TetGrid& grid, const Camera& camera,
                                      std::span<const Vec3> grad_rgb,
                                      std::span<const double> grad_mask);

enum class RenderMode { Soft, Hard };

struct RenderOptions {
  RenderMode mode = RenderMode::Soft;
  // Soft mode: drop faces whose three corner visibilities are all below
  // cull_below. Disabled when cull_below <= 0.
  double cull_below = 0.0;
  // Hard mode: occupancy threshold for surface extraction. When `occupancy`
  // is null it is derived from the vertex visibilities.
  double threshold = 0.5;
  const OccupancyField* occupancy = nullptr;
};

/// Faces used by soft rendering under `options`.
std::vector<int> soft_render_faces(const TetGrid& grid, const VertexAttributes& attrs,
                                   const RenderOptions& options);

Image render(const TetGrid& grid, const VertexAttributes& attrs, const Camera& camera,
             const RenderOptions& options = {});

}  // namespace deftet
