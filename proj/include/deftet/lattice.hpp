#pragma once

#include "deftet/common.hpp"
#include "deftet/occupancy_field.hpp"

#include <vector>

namespace deftet {

inline constexpr int kExterior = -1;

/// Deformable tetrahedral domain. Topology is fixed at construction; only
/// `offsets` changes during optimization.
///
/// faces[f] is oriented outward with respect to face_adjacency[f][0]; for the
/// second owner (if any) the reversed triangle is outward. Boundary faces have
/// face_adjacency[f][1] == kExterior.
struct TetGrid {
  int resolution = 1;
  std::vector<Vec3> rest_positions;
  std::vector<Vec3> offsets;
  std::vector<Tet> tets;
  std::vector<Tri> faces;
  std::vector<std::array<int, 2>> face_adjacency;
  std::vector<std::array<int, 4>> tet_faces;  // tet_faces[k][i]: face opposite corner i
  std::vector<std::vector<int>> vertex_neighbors;

  [[nodiscard]] std::size_t vertex_count() const { return rest_positions.size(); }
  [[nodiscard]] std::size_t tet_count() const { return tets.size(); }
  [[nodiscard]] std::size_t face_count() const { return faces.size(); }
  [[nodiscard]] double cell_size() const { return 1.0 / resolution; }
  [[nodiscard]] Vec3 position(int vertex) const {
    return rest_positions[vertex] + offsets[vertex];
  }
  [[nodiscard]] bool is_boundary_face(int face) const {
    return face_adjacency[face][1] == kExterior;
  }
};

/// Freudenthal (Kuhn) subdivision of an n^3 grid over the unit cube:
/// (n+1)^3 vertices, 6 n^3 tets, x-fastest vertex numbering.
TetGrid build_lattice(int resolution);

/// Builds faces, adjacency and neighbor lists for an arbitrary tet list.
/// Tets with negative rest volume are reoriented by swapping two corners.
TetGrid make_tet_grid(std::vector<Vec3> rest_positions, std::vector<Tet> tets,
                      int resolution = 1);

std::vector<Vec3> deformed_positions(const TetGrid& grid);

/// Outward-facing corner triple of `face` as seen from `tet` (one of its owners).
Tri oriented_face(const TetGrid& grid, int face, int tet);

struct OrientedFace {
  int face = -1;
  Tri vertices{};
};

/// Faces separating an occupied tet (value > threshold) from an unoccupied
/// tet or the exterior, oriented from occupied toward unoccupied.
std::vector<OrientedFace> surface_candidate_faces(const TetGrid& grid,
                                                  const OccupancyField& occ,
                                                  double threshold = 0.5);

std::vector<Tri> triangles_of(const std::vector<OrientedFace>& faces);

}  // namespace deftet
