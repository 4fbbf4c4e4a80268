#include "deftet/renderer.hpp"

#include "deftet/energies.hpp"
#include "deftet/occupancy.hpp"
#include "deftet/shapes.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <numeric>

namespace deftet {
namespace {

std::vector<int> all_faces(const TetGrid& g) {
  std::vector<int> f(g.face_count());
  std::iota(f.begin(), f.end(), 0);
  return f;
}

VertexAttributes random_attributes(const TetGrid& g, Rng& rng) {
  std::vector<Vec3> colors(g.vertex_count());
  std::vector<double> logits(g.vertex_count());
  for (auto& c : colors) c = testing::random_vec(rng, 0, 1);
  for (auto& l : logits) l = rng.uniform(-2, 2);
  return VertexAttributes::from_logits(colors, logits);
}

// A triangle at a single "face" grid, for hand-checkable compositing.
TetGrid stacked_triangles(int layers) {
  std::vector<Vec3> p;
  std::vector<Tet> tets;
  for (int i = 0; i < layers; ++i) {
    const double z = 1.0 + i;
    const int base = int(p.size());
    p.insert(p.end(), {Vec3(-50, -50, z), Vec3(50, -50, z), Vec3(0, 80, z), Vec3(0, 0, z + 0.5)});
    tets.push_back({base, base + 1, base + 2, base + 3});
  }
  return make_tet_grid(p, tets);
}

Camera identity_camera(int size) {
  Camera cam;
  cam.width = cam.height = size;
  cam.fx = cam.fy = size;
  cam.cx = cam.cy = size / 2.0;
  return cam;
}

// Index of the z = const face of layer i in a stacked_triangles grid.
int layer_face(const TetGrid& g, int layer) {
  for (std::size_t f = 0; f < g.face_count(); ++f) {
    const Tri& t = g.faces[f];
    if (t[0] / 4 == layer && t[0] % 4 != 3 && t[1] % 4 != 3 && t[2] % 4 != 3) return int(f);
  }
  return -1;
}

TEST(CastRays, NoFacesGiveNoHits) {
  const TetGrid g = build_lattice(2);
  const HitList h = cast_rays(g, {}, testing::camera_ring(1, 8)[0]);
  EXPECT_EQ(h.pixel_count(), 64u);
  EXPECT_TRUE(h.hits.empty());
}

TEST(CastRays, CoveringFaceHitsEveryPixelOnce) {
  const TetGrid g = stacked_triangles(1);
  const std::vector<int> face = {layer_face(g, 0)};
  const Camera cam = identity_camera(6);
  const HitList h = cast_rays(g, face, cam);
  for (std::size_t j = 0; j < h.pixel_count(); ++j) {
    ASSERT_EQ(h.pixel(j).size(), 1u);
    EXPECT_NEAR(h.pixel(j)[0].t, 1.0, 1e-12);  // t equals depth
  }
}

TEST(CastRays, MatchesBruteForceExactly) {
  TetGrid g = build_lattice(4);
  Rng rng(1);
  testing::jitter_offsets(g, rng, 0.03);
  const auto faces = all_faces(g);
  for (const Camera& cam : testing::camera_ring(3, 24)) {
    const HitList fast = cast_rays(g, faces, cam);
    const HitList slow = testing::brute_force_hits(g, faces, cam);
    ASSERT_EQ(fast.start, slow.start);
    ASSERT_EQ(fast.hits.size(), slow.hits.size());
    for (std::size_t i = 0; i < fast.hits.size(); ++i) {
      EXPECT_EQ(fast.hits[i].face, slow.hits[i].face);
      EXPECT_EQ(fast.hits[i].t, slow.hits[i].t);
      EXPECT_EQ(fast.hits[i].barycentric, slow.hits[i].barycentric);
    }
    for (std::size_t j = 0; j < fast.pixel_count(); ++j) {
      const auto pix = fast.pixel(j);
      for (std::size_t k = 1; k < pix.size(); ++k) EXPECT_LE(pix[k - 1].t, pix[k].t);
    }
  }
}

TEST(Composite, OpaqueFirstHitWins) {
  const TetGrid g = stacked_triangles(2);
  const std::vector<int> faces = {layer_face(g, 0), layer_face(g, 1)};
  VertexAttributes attrs;
  attrs.colors.assign(g.vertex_count(), Vec3(0, 0, 1));
  attrs.visibility.assign(g.vertex_count(), 1.0);
  for (int i = 0; i < 4; ++i) attrs.colors[i] = Vec3(1, 0, 0);
  const Image img = composite(cast_rays(g, faces, identity_camera(4)), attrs, g);
  for (std::size_t j = 0; j < img.pixel_count(); ++j) {
    EXPECT_NEAR(img.mask[j], 1.0, 1e-15);
    EXPECT_LT((img.rgb[j] - Vec3(1, 0, 0)).norm(), 1e-12);
  }
}

TEST(Composite, TwoHalfVisibleHits) {
  const TetGrid g = stacked_triangles(2);
  const std::vector<int> faces = {layer_face(g, 0), layer_face(g, 1)};
  VertexAttributes attrs;
  attrs.colors.assign(g.vertex_count(), Vec3(0, 1, 0));
  for (int i = 0; i < 4; ++i) attrs.colors[i] = Vec3(1, 0, 0);
  attrs.visibility.assign(g.vertex_count(), 0.5);
  const Image img = composite(cast_rays(g, faces, identity_camera(4)), attrs, g);
  for (std::size_t j = 0; j < img.pixel_count(); ++j) {
    EXPECT_NEAR(img.mask[j], 0.75, 1e-12);
    EXPECT_LT((img.rgb[j] - Vec3(0.5, 0.25, 0)).norm(), 1e-12);
  }
  attrs.visibility.assign(g.vertex_count(), 0.0);
  const Image none = composite(cast_rays(g, faces, identity_camera(4)), attrs, g);
  for (std::size_t j = 0; j < none.pixel_count(); ++j) {
    EXPECT_EQ(none.mask[j], 0.0);
    EXPECT_EQ(none.rgb[j], Vec3::Zero());
  }
}

// Per-pixel interpolated visibility, straight from the hit list.
std::vector<double> hit_visibility(const HitList& h, std::size_t j, const VertexAttributes& a,
                                   const TetGrid& g) {
  std::vector<double> d;
  for (const PixelHit& hit : h.pixel(j)) {
    const Tri& t = g.faces[hit.face];
    d.push_back(hit.barycentric[0] * a.visibility[t[0]] + hit.barycentric[1] * a.visibility[t[1]] +
                hit.barycentric[2] * a.visibility[t[2]]);
  }
  return d;
}

TEST(Composite, MaskMatchesClosedForm) {
  TetGrid g = build_lattice(3);
  Rng rng(2);
  testing::jitter_offsets(g, rng, 0.03);
  const VertexAttributes attrs = random_attributes(g, rng);
  const Camera cam = testing::camera_ring(1, 16)[0];
  const HitList h = cast_rays(g, all_faces(g), cam);
  const Image img = composite(h, attrs, g);
  for (std::size_t j = 0; j < h.pixel_count(); ++j) {
    double transmit = 1.0;
    double weight_sum = 0.0;
    for (double d : hit_visibility(h, j, attrs, g)) {
      const double m = transmit * d;
      EXPECT_GE(m, 0.0);
      EXPECT_LE(m, 1.0);
      weight_sum += m;
      transmit *= 1.0 - d;
    }
    EXPECT_NEAR(img.mask[j], 1.0 - transmit, 1e-9);
    EXPECT_LE(weight_sum, 1.0 + 1e-12);
  }
}

TEST(Composite, OrderMatters) {
  const TetGrid g = stacked_triangles(2);
  const std::vector<int> faces = {layer_face(g, 0), layer_face(g, 1)};
  VertexAttributes attrs;
  attrs.colors.assign(g.vertex_count(), Vec3(0, 1, 0));
  for (int i = 0; i < 4; ++i) attrs.colors[i] = Vec3(1, 0, 0);
  attrs.visibility.assign(g.vertex_count(), 0.6);
  HitList h = cast_rays(g, faces, identity_camera(2));
  const Image ascending = composite(h, attrs, g);
  for (std::size_t j = 0; j < h.pixel_count(); ++j) {
    std::reverse(h.hits.begin() + long(h.start[j]), h.hits.begin() + long(h.start[j + 1]));
  }
  const Image reversed = composite(h, attrs, g);
  EXPECT_GT((ascending.rgb[0] - reversed.rgb[0]).norm(), 0.1);
  EXPECT_LT((ascending.rgb[0] - Vec3(0.6, 0.24, 0)).norm(), 1e-12);
}

TEST(CompositeBackward, SingleOpaqueFaceColorGradient) {
  const TetGrid g = stacked_triangles(1);
  const std::vector<int> faces = {layer_face(g, 0)};
  VertexAttributes attrs;
  attrs.colors.assign(g.vertex_count(), Vec3(0.3, 0.3, 0.3));
  attrs.visibility.assign(g.vertex_count(), 1.0);
  const Camera cam = identity_camera(1);
  const HitList h = cast_rays(g, faces, cam);
  ASSERT_EQ(h.hits.size(), 1u);
  const std::vector<Vec3> up = {Vec3(1, 0, 0)};
  const std::vector<double> upm = {0.0};
  const auto back = composite_backward(h, attrs, g, cam, up, upm);
  const Tri& t = g.faces[faces[0]];
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(back.colors[t[i]].x(), h.hits[0].barycentric[i], 1e-15);
    EXPECT_EQ(back.colors[t[i]].y(), 0.0);
  }
}

TEST(CompositeBackward, ZeroUpstreamGivesZero) {
  TetGrid g = build_lattice(2);
  Rng rng(3);
  const VertexAttributes attrs = random_attributes(g, rng);
  const Camera cam = testing::camera_ring(1, 8)[0];
  const HitList h = cast_rays(g, all_faces(g), cam);
  const std::vector<Vec3> up(64, Vec3::Zero());
  const std::vector<double> upm(64, 0.0);
  const auto back = composite_backward(h, attrs, g, cam, up, upm);
  for (std::size_t i = 0; i < g.vertex_count(); ++i) {
    EXPECT_EQ(back.colors[i], Vec3::Zero());
    EXPECT_EQ(back.visibility_logits[i], 0.0);
    EXPECT_EQ(back.offsets[i], Vec3::Zero());
  }
}

// L = sum_j g_j . R_j + h_j M_j with the hit set frozen.
struct FrozenScene {
  TetGrid grid = build_lattice(2);
  Camera camera;
  HitList hits;
  std::vector<Vec3> colors;
  std::vector<double> logits;
  std::vector<Vec3> up_rgb;
  std::vector<double> up_mask;

  explicit FrozenScene(std::uint64_t seed, double phase) {
    Rng rng(seed);
    testing::jitter_offsets(grid, rng, 0.04);
    camera = testing::camera_ring(1, 8, 2.0, phase)[0];
    hits = cast_rays(grid, all_faces(grid), camera);
    colors.resize(grid.vertex_count());
    logits.resize(grid.vertex_count());
    for (auto& c : colors) c = testing::random_vec(rng, 0, 1);
    for (auto& l : logits) l = rng.uniform(-2, 2);
    for (int j = 0; j < 64; ++j) {
      up_rgb.push_back(testing::random_vec(rng, -1, 1));
      up_mask.push_back(rng.uniform(-1, 1));
    }
  }

  double loss() {
    HitList h = hits;
    refresh_barycentrics(h, grid, camera);
    const Image img = composite(h, VertexAttributes::from_logits(colors, logits), grid);
    double v = 0.0;
    for (std::size_t j = 0; j < img.pixel_count(); ++j) v += up_rgb[j].dot(img.rgb[j]) + up_mask[j] * img.mask[j];
    return v;
  }

  CompositeGradients backward() const {
    return composite_backward(hits, VertexAttributes::from_logits(colors, logits), grid, camera,
                              up_rgb, up_mask);
  }
};

TEST(CompositeBackward, MatchesFiniteDifferences) {
  for (int c = 0; c < 5; ++c) {
    FrozenScene s(10 + c, 0.3 + 0.9 * c);
    ASSERT_FALSE(s.hits.hits.empty());
    const CompositeGradients back = s.backward();

    std::vector<double> colors = testing::flatten(s.colors);
    auto fc = [&] {
      testing::unflatten(colors, s.colors);
      return s.loss();
    };
    EXPECT_LT(testing::fd_vector_error(colors, fc, testing::flatten(back.colors)), 1e-3);
    testing::unflatten(colors, s.colors);

    auto fl = [&] { return s.loss(); };
    EXPECT_LT(testing::fd_vector_error(s.logits, fl, back.visibility_logits), 1e-3);

    std::vector<double> offsets = testing::flatten(s.grid.offsets);
    auto fo = [&] {
      testing::unflatten(offsets, s.grid.offsets);
      return s.loss();
    };
    EXPECT_LT(testing::fd_vector_error(offsets, fo, testing::flatten(back.offsets)), 1e-3);
    testing::unflatten(offsets, s.grid.offsets);

    // Per-component check on the larger entries.
    std::vector<double> analytic = testing::flatten(back.offsets);
    double largest = 0.0;
    for (double a : analytic) largest = std::max(largest, std::abs(a));
    EXPECT_LT(testing::max_fd_error(offsets, fo, analytic, 1e-6, 1e-2 * largest), 1e-3);
    testing::unflatten(offsets, s.grid.offsets);
  }
}

TEST(Render, HardSilhouetteIsProjectedCube) {
  const TetGrid g = build_lattice(3);
  const OccupancyField full = OccupancyField::hard(std::vector<double>(g.tet_count(), 1.0));
  const SurfaceMesh box = make_box_mesh(Vec3(0, 0, 0), Vec3(1, 1, 1));
  RenderOptions opt;
  opt.mode = RenderMode::Hard;
  opt.occupancy = &full;
  for (const Camera& cam : testing::camera_ring(4, 20)) {
    const Image img = render(g, VertexAttributes{}, cam, opt);
    for (int y = 0; y < cam.height; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        bool hit = false;
        for (std::size_t t = 0; t < box.triangles.size() && !hit; ++t) {
          hit = ray_triangle_intersect(cam.center(), cam.pixel_ray(x, y), box.corner(t, 0),
                                       box.corner(t, 1), box.corner(t, 2))
                    .has_value();
        }
        EXPECT_EQ(img.mask[img.index(x, y)], hit ? 1.0 : 0.0) << x << "," << y;
      }
    }
  }
}

TEST(Render, OpaqueSoftMaskEqualsHardMask) {
  const TetGrid g = build_lattice(3);
  VertexAttributes attrs;
  attrs.colors.assign(g.vertex_count(), Vec3(0.5, 0.5, 0.5));
  attrs.visibility.assign(g.vertex_count(), 1.0);
  const Camera cam = testing::camera_ring(1, 24)[0];
  const Image soft = render(g, attrs, cam);
  RenderOptions hard_opt;
  hard_opt.mode = RenderMode::Hard;
  const Image hard = render(g, attrs, cam, hard_opt);
  for (std::size_t j = 0; j < soft.pixel_count(); ++j) EXPECT_NEAR(soft.mask[j], hard.mask[j], 1e-12);
}

TEST(Render, CullingChangesImageByLessThanTolerance) {
  const TetGrid g = build_lattice(6);
  std::vector<Vec3> colors;
  std::vector<double> logits;
  testing::colored_cube_state(g, 0.2, 0.8, colors, logits);
  const VertexAttributes attrs = VertexAttributes::from_logits(colors, logits);
  RenderOptions culled;
  culled.cull_below = 1e-3;
  EXPECT_LT(soft_render_faces(g, attrs, culled).size(), g.face_count());
  for (const Camera& cam : testing::camera_ring(3, 24)) {
    const Image a = render(g, attrs, cam);
    const Image b = render(g, attrs, cam, culled);
    for (std::size_t j = 0; j < a.pixel_count(); ++j) {
      EXPECT_LT((a.rgb[j] - b.rgb[j]).cwiseAbs().maxCoeff(), 1e-3);
      EXPECT_LT(std::abs(a.mask[j] - b.mask[j]), 1e-3);
    }
  }
}

TEST(Render, GradientStepReducesImageLoss) {
  const TetGrid g = build_lattice(3);
  std::vector<Vec3> colors;
  std::vector<double> logits;
  testing::colored_cube_state(g, 1.0 / 3.0, 2.0 / 3.0, colors, logits, 3.0);
  const Camera cam = testing::camera_ring(1, 24)[0];
  const Image target = render(g, VertexAttributes::from_logits(colors, logits), cam);

  Rng rng(4);
  for (auto& c : colors) c = (c + testing::random_vec(rng, -0.2, 0.2)).cwiseMax(0.0).cwiseMin(1.0);
  for (auto& l : logits) l += rng.uniform(-1, 1);
  const VertexAttributes attrs = VertexAttributes::from_logits(colors, logits);
  const HitList h = cast_rays(g, all_faces(g), cam);
  const Image before = composite(h, attrs, g);
  const ImageLossResult loss = image_loss(before, target, 1.0);
  const auto back = composite_backward(h, attrs, g, cam, loss.grad_rgb, loss.grad_mask);
  const double step = 1e-3;
  for (std::size_t i = 0; i < colors.size(); ++i) {
    colors[i] -= step * back.colors[i];
    logits[i] -= step * back.visibility_logits[i];
  }
  const Image after = render(g, VertexAttributes::from_logits(colors, logits), cam);
  EXPECT_LT(image_loss(after, target, 1.0).value, loss.value);
}

TEST(Render, InvalidCameraIsRejected) {
  const TetGrid g = build_lattice(1);
  VertexAttributes attrs;
  attrs.colors.assign(8, Vec3::Zero());
  attrs.visibility.assign(8, 0.5);
  Camera cam = identity_camera(4);
  cam.fx = -1.0;
  EXPECT_THROW(render(g, attrs, cam), InvalidArgument);
  cam = identity_camera(4);
  cam.world_to_camera(0, 0) = 2.0;
  EXPECT_THROW(render(g, attrs, cam), InvalidArgument);
}

}  // namespace
}  // namespace deftet
