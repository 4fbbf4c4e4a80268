#include "deftet/lattice.hpp"

#include "deftet/geometry.hpp"
#include "deftet/occupancy.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <map>
#include <set>

namespace deftet {
namespace {

double total_rest_volume(const TetGrid& g) {
  double v = 0.0;
  for (const Tet& t : g.tets) {
    v += signed_volume(g.rest_positions[t[0]], g.rest_positions[t[1]], g.rest_positions[t[2]],
                       g.rest_positions[t[3]]);
  }
  return v;
}

// Undirected edge -> number of faces using it.
std::map<std::pair<int, int>, int> edge_use(const std::vector<OrientedFace>& faces) {
  std::map<std::pair<int, int>, int> use;
  for (const auto& f : faces) {
    for (int e = 0; e < 3; ++e) ++use[std::minmax(f.vertices[e], f.vertices[(e + 1) % 3])];
  }
  return use;
}

TEST(Lattice, ResolutionOneIsSixTetCube) {
  const TetGrid g = build_lattice(1);
  EXPECT_EQ(g.vertex_count(), 8u);
  EXPECT_EQ(g.tet_count(), 6u);
  EXPECT_NEAR(total_rest_volume(g), 1.0, 1e-12);
}

TEST(Lattice, ResolutionTwoCountsAndOwners) {
  const TetGrid g = build_lattice(2);
  EXPECT_EQ(g.vertex_count(), 27u);
  EXPECT_EQ(g.tet_count(), 48u);
  std::map<int, int> owners;
  for (std::size_t k = 0; k < g.tet_count(); ++k) {
    for (int f : g.tet_faces[k]) ++owners[f];
  }
  for (std::size_t f = 0; f < g.face_count(); ++f) {
    EXPECT_EQ(owners[static_cast<int>(f)], g.is_boundary_face(static_cast<int>(f)) ? 1 : 2);
  }
}

TEST(Lattice, FaceCountMatchesBruteForceEnumeration) {
  const TetGrid g = build_lattice(4);
  std::set<std::array<int, 3>> unique;
  for (const Tet& t : g.tets) {
    for (int skip = 0; skip < 4; ++skip) {
      std::array<int, 3> tri{};
      int n = 0;
      for (int i = 0; i < 4; ++i) {
        if (i != skip) tri[n++] = t[i];
      }
      std::sort(tri.begin(), tri.end());
      unique.insert(tri);
    }
  }
  EXPECT_EQ(g.face_count(), unique.size());
  // Closed form for the Freudenthal lattice: 12 n^3 + 6 n^2 with n = 4.
  EXPECT_EQ(g.face_count(), 12u * 64 + 6u * 16);
}

TEST(Lattice, InvariantsHoldAcrossResolutions) {
  for (int n : {1, 2, 3, 5}) {
    const TetGrid g = build_lattice(n);
    EXPECT_EQ(g.vertex_count(), std::size_t((n + 1) * (n + 1) * (n + 1)));
    EXPECT_EQ(g.tet_count(), std::size_t(6 * n * n * n));
    EXPECT_NEAR(total_rest_volume(g), 1.0, 1e-12);
    for (const Tet& t : g.tets) {
      EXPECT_GT(signed_volume(g.rest_positions[t[0]], g.rest_positions[t[1]],
                              g.rest_positions[t[2]], g.rest_positions[t[3]]),
                0.0);
    }
    std::size_t boundary = 0;
    for (std::size_t f = 0; f < g.face_count(); ++f) boundary += g.is_boundary_face(int(f));
    EXPECT_EQ(boundary, std::size_t(12 * n * n));  // two triangles per boundary square
  }
}

TEST(Lattice, OwnerOrientationPointsAwayFromOwner) {
  const TetGrid g = build_lattice(2);
  for (std::size_t f = 0; f < g.face_count(); ++f) {
    const Tri& tri = g.faces[f];
    const int owner = g.face_adjacency[f][0];
    const Tet& t = g.tets[owner];
    int apex = -1;
    for (int v : t) {
      if (v != tri[0] && v != tri[1] && v != tri[2]) apex = v;
    }
    // The apex must be behind the outward face: negative signed volume with the face.
    EXPECT_LT(signed_volume(g.rest_positions[tri[0]], g.rest_positions[tri[1]],
                            g.rest_positions[tri[2]], g.rest_positions[apex]),
              0.0);
  }
}

TEST(Lattice, DeterministicOutput) {
  const TetGrid a = build_lattice(3);
  const TetGrid b = build_lattice(3);
  EXPECT_EQ(a.tets, b.tets);
  EXPECT_EQ(a.faces, b.faces);
  for (std::size_t i = 0; i < a.vertex_count(); ++i) EXPECT_EQ(a.rest_positions[i], b.rest_positions[i]);
  // x-fastest numbering.
  EXPECT_EQ(a.rest_positions[1], Vec3(1.0 / 3.0, 0, 0));
  EXPECT_EQ(a.rest_positions[4], Vec3(0, 1.0 / 3.0, 0));
}

TEST(Lattice, RejectsZeroResolution) {
  EXPECT_THROW(build_lattice(0), InvalidArgument);
  EXPECT_THROW(build_lattice(-3), InvalidArgument);
}

TEST(DeformedPositions, AddsOffsets) {
  TetGrid g = build_lattice(2);
  auto rest = deformed_positions(g);
  for (std::size_t i = 0; i < g.vertex_count(); ++i) EXPECT_EQ(rest[i], g.rest_positions[i]);
  g.offsets[0] = Vec3(0.1, 0, 0);
  auto moved = deformed_positions(g);
  EXPECT_EQ(moved[0] - g.rest_positions[0], Vec3(0.1, 0, 0));
  Rng rng(5);
  testing::jitter_offsets(g, rng, 0.05);
  const auto first = deformed_positions(g);
  const auto second = deformed_positions(g);
  EXPECT_EQ(first, second);
}

TEST(SurfaceCandidates, AllOccupiedGivesCubeBoundary) {
  const TetGrid g = build_lattice(3);
  const auto occ = OccupancyField::hard(std::vector<double>(g.tet_count(), 1.0));
  const auto faces = surface_candidate_faces(g, occ);
  ASSERT_EQ(faces.size(), std::size_t(12 * 9));
  for (const auto& f : faces) {
    EXPECT_TRUE(g.is_boundary_face(f.face));
    const Vec3 a = g.rest_positions[f.vertices[0]];
    const Vec3 n = (g.rest_positions[f.vertices[1]] - a).cross(g.rest_positions[f.vertices[2]] - a);
    const Vec3 c = (a + g.rest_positions[f.vertices[1]] + g.rest_positions[f.vertices[2]]) / 3.0;
    EXPECT_GT(n.dot(c - Vec3(0.5, 0.5, 0.5)), 0.0);  // outward
  }
}

TEST(SurfaceCandidates, NothingOccupiedGivesEmptySet) {
  const TetGrid g = build_lattice(3);
  const auto occ = OccupancyField::hard(std::vector<double>(g.tet_count(), 0.0));
  EXPECT_TRUE(surface_candidate_faces(g, occ).empty());
}

TEST(SurfaceCandidates, SingleInteriorTetIsClosedAndOutward) {
  const TetGrid g = build_lattice(3);
  std::vector<double> labels(g.tet_count(), 0.0);
  const int k = 6 * 13 + 2;  // a tet of the center cell
  labels[k] = 1.0;
  const auto faces = surface_candidate_faces(g, OccupancyField::hard(labels));
  ASSERT_EQ(faces.size(), 4u);
  for (const auto& [edge, count] : edge_use(faces)) EXPECT_EQ(count, 2);
  const Tet& t = g.tets[k];
  const Vec3 c = centroid(g.rest_positions[t[0]], g.rest_positions[t[1]], g.rest_positions[t[2]],
                          g.rest_positions[t[3]]);
  for (const auto& f : faces) {
    const Vec3 a = g.rest_positions[f.vertices[0]];
    const Vec3 n = (g.rest_positions[f.vertices[1]] - a).cross(g.rest_positions[f.vertices[2]] - a);
    EXPECT_GT(n.dot(a - c), 0.0);
  }
}

TEST(SurfaceCandidates, OrientedEdgesCancelForRandomFields) {
  const TetGrid g = build_lattice(4);
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> labels(g.tet_count());
    for (double& l : labels) l = rng.uniform() < 0.5 ? 1.0 : 0.0;
    const auto faces = surface_candidate_faces(g, OccupancyField::hard(labels));
    std::map<std::pair<int, int>, int> directed;
    for (const auto& f : faces) {
      for (int e = 0; e < 3; ++e) ++directed[{f.vertices[e], f.vertices[(e + 1) % 3]}];
    }
    for (const auto& [edge, count] : directed) {
      const int reverse = directed[{edge.second, edge.first}];
      EXPECT_EQ(count, reverse);
    }
  }
}

TEST(SurfaceCandidates, MatchesUnitFaceProbability) {
  const TetGrid g = build_lattice(3);
  Rng rng(3);
  std::vector<double> labels(g.tet_count());
  for (double& l : labels) l = rng.uniform() < 0.4 ? 1.0 : 0.0;
  const auto occ = OccupancyField::hard(labels);
  std::set<int> returned;
  for (const auto& f : surface_candidate_faces(g, occ)) returned.insert(f.face);
  for (std::size_t f = 0; f < g.face_count(); ++f) {
    EXPECT_EQ(returned.count(int(f)) == 1, face_probability(g, occ, int(f)) == 1.0);
  }
}

TEST(SurfaceCandidates, ValidatesInputs) {
  const TetGrid g = build_lattice(2);
  EXPECT_THROW(surface_candidate_faces(g, OccupancyField::hard({1.0, 0.0})), InvalidArgument);
  const auto occ = OccupancyField::hard(std::vector<double>(g.tet_count(), 1.0));
  EXPECT_THROW(surface_candidate_faces(g, occ, 0.0), InvalidArgument);
  EXPECT_THROW(surface_candidate_faces(g, occ, 1.0), InvalidArgument);
}

TEST(MakeTetGrid, ReorientsNegativeTets) {
  std::vector<Vec3> p = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const TetGrid g = make_tet_grid(p, {{0, 2, 1, 3}});
  const Tet& t = g.tets[0];
  EXPECT_GT(signed_volume(p[t[0]], p[t[1]], p[t[2]], p[t[3]]), 0.0);
  EXPECT_EQ(g.face_count(), 4u);
  EXPECT_THROW(make_tet_grid(p, {{0, 1, 2, 7}}), InvalidArgument);
}

}  // namespace
}  // namespace deftet
