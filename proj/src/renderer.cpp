#include "deftet/renderer.hpp"

#include "deftet/occupancy.hpp"
#include "deftet/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace deftet {

namespace {

constexpr std::size_t kPixelChunk = 256;
constexpr double kMinDepth = 1e-9;

double cross2(const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); }

Vec2 pixel_center(int x, int y) { return {x + 0.5, y + 0.5}; }

// d cross2(u, v) / du and / dv.
Vec2 d_cross_du(const Vec2& v) { return {v.y(), -v.x()}; }
Vec2 d_cross_dv(const Vec2& u) { return {-u.y(), u.x()}; }

}  // namespace

void Camera::validate(double tolerance) const {
  std::ostringstream why;
  if (width <= 0 || height <= 0) why << "image size must be positive";
  else if (!(fx > 0.0) || !(fy > 0.0)) why << "focal lengths must be positive";
  else if (!world_to_camera.allFinite()) why << "extrinsic contains non-finite values";
  else {
    const Mat3 r = rotation();
    const double err = (r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (err > tolerance) why << "rotation is not orthonormal (error " << err << ")";
    else if (r.determinant() < 0.0) why << "rotation has negative determinant";
    else if ((world_to_camera.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() >
             tolerance) {
      why << "last row of world_to_camera must be 0 0 0 1";
    }
  }
  if (!why.str().empty()) throw ValidationError("camera: " + why.str());
}

Vec3 Camera::pixel_ray(int x, int y) const {
  const Vec3 d((x + 0.5 - cx) / fx, (y + 0.5 - cy) / fy, 1.0);
  return rotation().transpose() * d;
}

Vec2 Camera::project(const Vec3& p) const {
  const Vec3 c = to_camera(p);
  return {fx * c.x() / c.z() + cx, fy * c.y() / c.z() + cy};
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width,
                       int height, double fov_y_degrees) {
  const Vec3 forward = (target - eye).normalized();
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();
  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.fy = 0.5 * height / std::tan(0.5 * fov_y_degrees * std::numbers::pi / 180.0);
  cam.fx = cam.fy;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.world_to_camera.setIdentity();
  cam.world_to_camera.topLeftCorner<3, 3>() = r;
  cam.world_to_camera.topRightCorner<3, 1>() = -r * eye;
  return cam;
}

VertexAttributes VertexAttributes::from_logits(std::vector<Vec3> colors,
                                               const std::vector<double>& visibility_logits) {
  VertexAttributes a;
  a.colors = std::move(colors);
  a.visibility.resize(visibility_logits.size());
  std::transform(visibility_logits.begin(), visibility_logits.end(), a.visibility.begin(),
                 logistic);
  return a;
}

void sort_hits(std::vector<PixelHit>& hits) {
  std::sort(hits.begin(), hits.end(), [](const PixelHit& a, const PixelHit& b) {
    return a.t < b.t || (a.t == b.t && a.face < b.face);
  });
}

std::optional<Vec3> face_pixel_barycentrics(const TetGrid& grid, int face, const Camera& camera,
                                            int x, int y) {
  const Tri& f = grid.faces[face];
  Vec2 q[3];
  for (int i = 0; i < 3; ++i) {
    const Vec3 c = camera.to_camera(grid.position(f[i]));
    if (!(c.z() > kMinDepth)) return std::nullopt;
    q[i] = Vec2(camera.fx * c.x() / c.z() + camera.cx, camera.fy * c.y() / c.z() + camera.cy);
  }
  try {
    return barycentric_2d(q[0], q[1], q[2], pixel_center(x, y));
  } catch (const DegenerateGeometry&) {
    return std::nullopt;
  }
}

HitList cast_rays(const TetGrid& grid, std::span<const int> faces, const Camera& camera) {
  camera.validate();
  const std::vector<Vec3> positions = deformed_positions(grid);
  std::vector<Tri> tris;
  tris.reserve(faces.size());
  for (int f : faces) tris.push_back(grid.faces[f]);
  const TriangleBvh bvh(positions, tris);

  const std::size_t pixels = std::size_t(camera.width) * camera.height;
  const std::size_t chunks = chunk_count(pixels, kPixelChunk);
  std::vector<std::vector<PixelHit>> chunk_hits(chunks);
  std::vector<std::size_t> counts(pixels, 0);
  const Vec3 origin = camera.center();

  parallel_chunks(pixels, kPixelChunk, [&](std::size_t c, std::size_t begin, std::size_t end) {
    std::vector<TriangleBvh::Hit> raw;
    std::vector<PixelHit> pixel_hits;
    for (std::size_t j = begin; j < end; ++j) {
      const int x = static_cast<int>(j % camera.width);
      const int y = static_cast<int>(j / camera.width);
      raw.clear();
      bvh.all_hits(origin, camera.pixel_ray(x, y), raw);
      pixel_hits.clear();
      for (const auto& h : raw) {
        const int face = faces[h.triangle];
        if (auto bary = face_pixel_barycentrics(grid, face, camera, x, y)) {
          pixel_hits.push_back({face, h.hit.t, *bary});
        }
      }
      sort_hits(pixel_hits);
      counts[j] = pixel_hits.size();
      chunk_hits[c].insert(chunk_hits[c].end(), pixel_hits.begin(), pixel_hits.end());
    }
  });

  HitList out;
  out.width = camera.width;
  out.height = camera.height;
  out.start.resize(pixels + 1, 0);
  for (std::size_t j = 0; j < pixels; ++j) out.start[j + 1] = out.start[j] + counts[j];
  out.hits.reserve(out.start.back());
  for (auto& h : chunk_hits) out.hits.insert(out.hits.end(), h.begin(), h.end());
  return out;
}

void refresh_barycentrics(HitList& hits, const TetGrid& grid, const Camera& camera) {
  for (std::size_t j = 0; j < hits.pixel_count(); ++j) {
    const int x = static_cast<int>(j % hits.width);
    const int y = static_cast<int>(j / hits.width);
    for (std::size_t h = hits.start[j]; h < hits.start[j + 1]; ++h) {
      auto bary = face_pixel_barycentrics(grid, hits.hits[h].face, camera, x, y);
      if (!bary) throw DegenerateGeometry("refresh_barycentrics: face became degenerate");
      hits.hits[h].barycentric = *bary;
    }
  }
}

Image composite(const HitList& hits, const VertexAttributes& attrs, const TetGrid& grid) {
  Image img(hits.width, hits.height);
  for (std::size_t j = 0; j < hits.pixel_count(); ++j) {
    double transmittance = 1.0;
    double mask = 0.0;
    Vec3 color = Vec3::Zero();
    for (const PixelHit& h : hits.pixel(j)) {
      const Tri& f = grid.faces[h.face];
      const Vec3& w = h.barycentric;
      const double d = w(0) * attrs.visibility[f[0]] + w(1) * attrs.visibility[f[1]] +
                       w(2) * attrs.visibility[f[2]];
      const Vec3 c = w(0) * attrs.colors[f[0]] + w(1) * attrs.colors[f[1]] +
                     w(2) * attrs.colors[f[2]];
      const double m = transmittance * d;
      mask += m;
      color += m * c;
      transmittance *= 1.0 - d;
    }
    img.mask[j] = mask;
    img.rgb[j] = color;
  }
  return img;
}

CompositeGradients composite_backward(const HitList& hits, const VertexAttributes& attrs,
                                      const TetGrid& grid, const Camera& camera,
                                      std::span<const Vec3> grad_rgb,
                                      std::span<const double> grad_mask) {
  const std::size_t n = grid.vertex_count();
  const std::size_t pixels = hits.pixel_count();
  if (grad_rgb.size() != pixels || grad_mask.size() != pixels) {
    throw InvalidArgument("composite_backward: upstream gradient size mismatch");
  }

  struct Buffer {
    std::vector<Vec3> colors;
    std::vector<double> visibility;
    std::vector<Vec3> offsets;
  };
  const std::size_t chunks = chunk_count(pixels, kPixelChunk);
  std::vector<Buffer> buffers(chunks);

  // Projection of every vertex, with the 2x3 Jacobian of (u, v) w.r.t. world position.
  const Mat3 rot = camera.rotation();
  std::vector<Vec2> projected(n);
  std::vector<Eigen::Matrix<double, 2, 3>> jacobian(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 c = camera.to_camera(grid.position(static_cast<int>(i)));
    projected[i] = Vec2(camera.fx * c.x() / c.z() + camera.cx, camera.fy * c.y() / c.z() + camera.cy);
    Eigen::Matrix<double, 2, 3> dq_dc;
    dq_dc << camera.fx / c.z(), 0.0, -camera.fx * c.x() / (c.z() * c.z()),
        0.0, camera.fy / c.z(), -camera.fy * c.y() / (c.z() * c.z());
    jacobian[i] = dq_dc * rot;
  }

  parallel_chunks(pixels, kPixelChunk, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    Buffer& buf = buffers[chunk];
    buf.colors.assign(n, Vec3::Zero());
    buf.visibility.assign(n, 0.0);
    buf.offsets.assign(n, Vec3::Zero());
    std::vector<double> d;
    std::vector<Vec3> c;
    std::vector<double> trans;
    for (std::size_t j = begin; j < end; ++j) {
      const auto pix = hits.pixel(j);
      if (pix.empty()) continue;
      const Vec3& g_rgb = grad_rgb[j];
      const double g_mask = grad_mask[j];
      if (g_rgb.isZero() && g_mask == 0.0) continue;

      const std::size_t count = pix.size();
      d.resize(count);
      c.resize(count);
      trans.resize(count);
      double t = 1.0;
      for (std::size_t k = 0; k < count; ++k) {
        const Tri& f = grid.faces[pix[k].face];
        const Vec3& w = pix[k].barycentric;
        d[k] = w(0) * attrs.visibility[f[0]] + w(1) * attrs.visibility[f[1]] +
               w(2) * attrs.visibility[f[2]];
        c[k] = w(0) * attrs.colors[f[0]] + w(1) * attrs.colors[f[1]] + w(2) * attrs.colors[f[2]];
        trans[k] = t;
        t *= 1.0 - d[k];
      }

      // dL/dd_k = T_k (a_k - U_k) with a_k = gM + gR.c_k and the suffix sum
      // U_k = d_{k+1} a_{k+1} + (1 - d_{k+1}) U_{k+1}; no division by (1 - d).
      const int x = static_cast<int>(j % hits.width);
      const int y = static_cast<int>(j / hits.width);
      const Vec2 p = pixel_center(x, y);
      double suffix = 0.0;
      for (std::size_t kk = count; kk-- > 0;) {
        const double a = g_mask + g_rgb.dot(c[kk]);
        const double g_d = trans[kk] * (a - suffix);
        const Vec3 g_c = trans[kk] * d[kk] * g_rgb;
        suffix = d[kk] * a + (1.0 - d[kk]) * suffix;

        const Tri& f = grid.faces[pix[kk].face];
        const Vec3& w = pix[kk].barycentric;
        double g_w[3];
        for (int i = 0; i < 3; ++i) {
          buf.visibility[f[i]] += w(i) * g_d;
          buf.colors[f[i]] += w(i) * g_c;
          g_w[i] = g_d * attrs.visibility[f[i]] + g_c.dot(attrs.colors[f[i]]);
        }

        // w_i = N_i / A with N_a = cross(q_b - p, q_c - p) and cyclic, A = sum N_i.
        const Vec2 r[3] = {projected[f[0]] - p, projected[f[1]] - p, projected[f[2]] - p};
        const double area = cross2(r[0], r[1]) + cross2(r[1], r[2]) + cross2(r[2], r[0]);
        const double g_bar = g_w[0] * w(0) + g_w[1] * w(1) + g_w[2] * w(2);
        Vec2 g_q[3] = {Vec2::Zero(), Vec2::Zero(), Vec2::Zero()};
        for (int i = 0; i < 3; ++i) {
          const double coeff = (g_w[i] - g_bar) / area;
          const int b = (i + 1) % 3;
          const int e = (i + 2) % 3;
          g_q[b] += coeff * d_cross_du(r[e]);
          g_q[e] += coeff * d_cross_dv(r[b]);
        }
        for (int i = 0; i < 3; ++i) buf.offsets[f[i]] += jacobian[f[i]].transpose() * g_q[i];
      }
    }
  });

  CompositeGradients out;
  out.colors.assign(n, Vec3::Zero());
  out.visibility.assign(n, 0.0);
  out.offsets.assign(n, Vec3::Zero());
  for (const Buffer& buf : buffers) {
    if (buf.colors.empty()) continue;
    for (std::size_t i = 0; i < n; ++i) {
      out.colors[i] += buf.colors[i];
      out.visibility[i] += buf.visibility[i];
      out.offsets[i] += buf.offsets[i];
    }
  }
  out.visibility_logits.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = attrs.visibility[i];
    out.visibility_logits[i] = out.visibility[i] * v * (1.0 - v);
  }
  return out;
}

std::vector<int> soft_render_faces(const TetGrid& grid, const VertexAttributes& attrs,
                                   const RenderOptions& options) {
  std::vector<int> faces;
  faces.reserve(grid.face_count());
  for (std::size_t f = 0; f < grid.face_count(); ++f) {
    if (options.cull_below > 0.0) {
      const Tri& t = grid.faces[f];
      if (attrs.visibility[t[0]] < options.cull_below &&
          attrs.visibility[t[1]] < options.cull_below &&
          attrs.visibility[t[2]] < options.cull_below) {
        continue;
      }
    }
    faces.push_back(static_cast<int>(f));
  }
  return faces;
}

Image render(const TetGrid& grid, const VertexAttributes& attrs, const Camera& camera,
             const RenderOptions& options) {
  try {
    camera.validate();
  } catch (const ValidationError& e) {
    throw InvalidArgument(std::string("render: ") + e.what());
  }
  if (options.mode == RenderMode::Soft || options.occupancy == nullptr) {
    if (attrs.colors.size() != grid.vertex_count() ||
        attrs.visibility.size() != grid.vertex_count()) {
      throw InvalidArgument("render: vertex attribute count does not match grid");
    }
  }

  if (options.mode == RenderMode::Soft) {
    const std::vector<int> faces = soft_render_faces(grid, attrs, options);
    return composite(cast_rays(grid, faces, camera), attrs, grid);
  }

  const OccupancyField occ = options.occupancy != nullptr
                                 ? *options.occupancy
                                 : occupancy_from_vertex_visibility(grid, attrs.visibility);
  const std::vector<OrientedFace> surface = surface_candidate_faces(grid, occ, options.threshold);
  std::vector<int> ids;
  ids.reserve(surface.size());
  for (const auto& f : surface) ids.push_back(f.face);
  const HitList hits = cast_rays(grid, ids, camera);

  // Opaque nearest-hit preview with flat shading.
  Image img(camera.width, camera.height);
  const Vec3 eye = camera.center();
  for (std::size_t j = 0; j < hits.pixel_count(); ++j) {
    const auto pix = hits.pixel(j);
    if (pix.empty()) continue;
    const Tri& f = grid.faces[pix.front().face];
    const Vec3 a = grid.position(f[0]);
    const Vec3 normal = (grid.position(f[1]) - a).cross(grid.position(f[2]) - a).normalized();
    const Vec3 view = (a - eye).normalized();
    const double shade = 0.2 + 0.8 * std::abs(normal.dot(view));
    img.rgb[j] = Vec3::Constant(shade);
    img.mask[j] = 1.0;
  }
  return img;
}

}  // namespace deftet
