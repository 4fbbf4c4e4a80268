#pragma once

// Test-only helpers: finite-difference and brute-force oracles plus shared
// fixtures. Nothing here calls the code paths it is used to check.

#include "deftet/geometry.hpp"
#include "deftet/lattice.hpp"
#include "deftet/renderer.hpp"
#include "deftet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace deftet::testing {

inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Largest relative error between an analytic gradient and central
/// differences of `f` over the listed scalar parameters.
inline double max_fd_error(std::vector<double>& params, const std::function<double()>& f,
                           const std::vector<double>& analytic, double h = 1e-6,
                           double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = f();
    params[i] = keep - h;
    const double down = f();
    params[i] = keep;
    const double numeric = (up - down) / (2.0 * h);
    worst = std::max(worst, relative_error(analytic[i], numeric, floor));
  }
  return worst;
}

/// Gradient error measured on the whole vector: |g_a - g_fd| / max(|g_a|, |g_fd|).
/// Components near zero cannot blow the ratio up.
inline double fd_vector_error(std::vector<double>& params, const std::function<double()>& f,
                              const std::vector<double>& analytic, double h = 1e-6) {
  double diff2 = 0.0;
  double a2 = 0.0;
  double n2 = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = f();
    params[i] = keep - h;
    const double down = f();
    params[i] = keep;
    const double numeric = (up - down) / (2.0 * h);
    diff2 += (numeric - analytic[i]) * (numeric - analytic[i]);
    a2 += analytic[i] * analytic[i];
    n2 += numeric * numeric;
  }
  const double scale = std::sqrt(std::max(a2, n2));
  return scale > 0.0 ? std::sqrt(diff2) / scale : 0.0;
}

/// Like fd_vector_error, but for piecewise-smooth losses: coordinates whose
/// one-sided differences disagree straddle a kink (a nearest-feature switch
/// inside +-h) and are skipped. `skipped` receives their count.
inline double fd_vector_error_piecewise(std::vector<double>& params, const std::function<double()>& f,
                                        const std::vector<double>& analytic, std::size_t& skipped,
                                        double h = 1e-6) {
  const double f0 = f();
  double diff2 = 0.0;
  double a2 = 0.0;
  double n2 = 0.0;
  skipped = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = f();
    params[i] = keep - h;
    const double down = f();
    params[i] = keep;
    const double forward = (up - f0) / h;
    const double backward = (f0 - down) / h;
    if (std::abs(forward - backward) > 1e-3 * std::max({std::abs(forward), std::abs(backward), 1.0})) {
      ++skipped;
      continue;
    }
    const double numeric = 0.5 * (forward + backward);
    diff2 += (numeric - analytic[i]) * (numeric - analytic[i]);
    a2 += analytic[i] * analytic[i];
    n2 += numeric * numeric;
  }
  const double scale = std::sqrt(std::max(a2, n2));
  return scale > 0.0 ? std::sqrt(diff2) / scale : 0.0;
}

inline std::vector<double> flatten(const std::vector<Vec3>& v) {
  std::vector<double> out;
  out.reserve(3 * v.size());
  for (const Vec3& p : v) out.insert(out.end(), {p.x(), p.y(), p.z()});
  return out;
}

inline void unflatten(const std::vector<double>& flat, std::vector<Vec3>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = Vec3(flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]);
}

inline Vec3 random_vec(Rng& rng, double lo, double hi) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

inline void jitter_offsets(TetGrid& grid, Rng& rng, double amplitude) {
  for (Vec3& o : grid.offsets) o = random_vec(rng, -amplitude, amplitude);
}

/// Every ray-face pair, sorted by (t, face). Independent of the BVH.
inline HitList brute_force_hits(const TetGrid& grid, const std::vector<int>& faces,
                                const Camera& camera) {
  HitList out;
  out.width = camera.width;
  out.height = camera.height;
  out.start.push_back(0);
  const Vec3 origin = camera.center();
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      std::vector<PixelHit> hits;
      const Vec3 dir = camera.pixel_ray(x, y);
      for (int f : faces) {
        const Tri& t = grid.faces[f];
        auto hit = ray_triangle_intersect(origin, dir, grid.position(t[0]), grid.position(t[1]),
                                          grid.position(t[2]));
        if (!hit) continue;
        auto bary = face_pixel_barycentrics(grid, f, camera, x, y);
        if (!bary) continue;
        hits.push_back({f, hit->t, *bary});
      }
      std::sort(hits.begin(), hits.end(), [](const PixelHit& a, const PixelHit& b) {
        return a.t < b.t || (a.t == b.t && a.face < b.face);
      });
      out.hits.insert(out.hits.end(), hits.begin(), hits.end());
      out.start.push_back(out.hits.size());
    }
  }
  return out;
}

/// Cameras on a ring around the unit cube at a generic (non lattice-aligned)
/// elevation, looking at the cube center.
inline std::vector<Camera> camera_ring(int count, int size, double radius = 2.2,
                                       double phase = 0.1234) {
  std::vector<Camera> cams;
  const Vec3 center(0.5, 0.5, 0.5);
  for (int i = 0; i < count; ++i) {
    const double angle = phase + 2.0 * 3.141592653589793 * i / count;
    const double elevation = 0.37 + 0.25 * std::sin(1.7 * i + 0.3);
    const Vec3 eye = center + radius * Vec3(std::cos(angle) * std::cos(elevation),
                                            std::sin(elevation),
                                            std::sin(angle) * std::cos(elevation));
    cams.push_back(Camera::look_at(eye, center, Vec3(0.0, 1.0, 0.0), size, size, 40.0));
  }
  return cams;
}

/// Colored-cube attribute state: vertices inside [lo, hi]^3 are visible with a
/// position-dependent color, the rest are transparent.
inline void colored_cube_state(const TetGrid& grid, double lo, double hi,
                               std::vector<Vec3>& colors, std::vector<double>& logits,
                               double logit_scale = 12.0) {
  colors.resize(grid.vertex_count());
  logits.resize(grid.vertex_count());
  for (std::size_t i = 0; i < grid.vertex_count(); ++i) {
    const Vec3 p = grid.rest_positions[i];
    const bool inside = (p.array() >= lo - 1e-12).all() && (p.array() <= hi + 1e-12).all();
    colors[i] = Vec3(0.15 + 0.7 * p.x(), 0.15 + 0.7 * p.y(), 0.85 - 0.7 * p.z());
    logits[i] = inside ? logit_scale : -logit_scale;
  }
}

}  // namespace deftet::testing
